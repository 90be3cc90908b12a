#include "sparselmi/sim.hpp"

#include "sparselmi/msstab.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace sparselmi {

Philox4x32::Block Philox4x32::operator()(Block c) const {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * c[2];
        c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0, static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1, static_cast<std::uint32_t>(p0)};
        k0 += w0;
        k1 += w1;
    }
    return c;
}

std::array<double, 2> normal_pair(const Philox4x32::Block& bits) {
    constexpr double scale = 0x1.0p-53;
    const std::uint64_t a = ((static_cast<std::uint64_t>(bits[0]) << 32) | bits[1]) >> 11;
    const std::uint64_t b = ((static_cast<std::uint64_t>(bits[2]) << 32) | bits[3]) >> 11;
    const double u1 = (static_cast<double>(a) + 1.0) * scale;  // (0, 1]
    const double u2 = static_cast<double>(b) * scale;
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    return {rad * std::cos(th), rad * std::sin(th)};
}

namespace {

constexpr long kChunk = 64;

// Fills `out` (rows x paths in the chunk) with normals for one (tag, step).
void fill_normals(const Philox4x32& rng, std::uint32_t tag, long step, long first_path, Matrix& out) {
    const Eigen::Index rows = out.rows();
    for (Eigen::Index p = 0; p < out.cols(); ++p) {
        for (Eigen::Index j = 0; j < rows; j += 2) {
            const auto z = normal_pair(rng({static_cast<std::uint32_t>(j / 2), static_cast<std::uint32_t>(step),
                                            static_cast<std::uint32_t>(first_path + p), tag}));
            out(j, p) = z[0];
            if (j + 1 < rows) out(j + 1, p) = z[1];
        }
    }
}

struct ChunkOut {
    std::vector<double> sum_ms, sum_ms2;  // per recorded time
    std::vector<double> cost;             // per path
};

struct Engine {
    TimeDomain domain;
    Matrix f;
    std::vector<double> c;
    std::vector<Matrix> d;
    Matrix x0_factor;
    const Matrix* weight = nullptr;
    long total_steps = 0;
    double dt = 1.0;
    std::vector<long> record_steps;

    ChunkOut run(const Philox4x32& rng, long first, long count) const {
        const Eigen::Index n = f.rows();
        ChunkOut out;
        out.sum_ms.assign(record_steps.size(), 0.0);
        out.sum_ms2.assign(record_steps.size(), 0.0);
        out.cost.assign(static_cast<std::size_t>(count), 0.0);

        Matrix z(n, count);
        fill_normals(rng, 0u, 0, first, z);
        Matrix x = x0_factor * z;
        Matrix xi(static_cast<Eigen::Index>(c.size()), count);
        Eigen::RowVectorXd prev_cost_rate;
        auto cost_rate = [&](const Matrix& xs) -> Eigen::RowVectorXd {
            return (xs.cwiseProduct(*weight * xs)).colwise().sum();
        };
        if (weight) prev_cost_rate = cost_rate(x);

        std::size_t rec = 0;
        auto record = [&](long step) {
            if (rec < record_steps.size() && record_steps[rec] == step) {
                const Eigen::RowVectorXd sq = x.colwise().squaredNorm();
                out.sum_ms[rec] = sq.sum();
                out.sum_ms2[rec] = sq.squaredNorm();
                ++rec;
            }
        };
        record(0);
        const double sdt = std::sqrt(dt);
        for (long s = 0; s < total_steps; ++s) {
            if (!c.empty()) fill_normals(rng, 1u + static_cast<std::uint32_t>(s >> 32), s, first, xi);
            Matrix next = domain == TimeDomain::continuous ? Matrix(x + dt * (f * x)) : Matrix(f * x);
            const double amp = domain == TimeDomain::continuous ? sdt : 1.0;
            for (std::size_t i = 0; i < c.size(); ++i) {
                next.noalias() += ((c[i] * amp) * (d[i] * x)) *
                                  xi.row(static_cast<Eigen::Index>(i)).asDiagonal();
            }
            if (weight) {
                if (domain == TimeDomain::continuous) {
                    const Eigen::RowVectorXd rate = cost_rate(next);
                    for (long p = 0; p < count; ++p) out.cost[p] += 0.5 * dt * (prev_cost_rate(p) + rate(p));
                    prev_cost_rate = rate;
                } else {
                    for (long p = 0; p < count; ++p) out.cost[p] += prev_cost_rate(p);
                    prev_cost_rate = cost_rate(next);
                }
            }
            x.swap(next);
            record(s + 1);
        }
        return out;
    }
};

Engine make_engine(const StochasticSystem& sys, const Matrix& k, const SimOptions& opts,
                   std::vector<std::string>& warnings) {
    validate(sys);
    if (opts.paths < 1) throw std::invalid_argument("paths must be at least 1");
    if (opts.record_every < 1) throw std::invalid_argument("record_every must be at least 1");
    Engine e;
    e.domain = sys.domain;
    const ClosedLoop cl = close_loop(sys, k);
    e.f = cl.drift;
    for (const auto& df : cl.diffusion) {
        e.c.push_back(df.intensity);
        e.d.push_back(df.matrix);
    }
    e.x0_factor = sqrt_psd(sys.sigma0);
    if (sys.domain == TimeDomain::continuous) {
        if (!(opts.dt > 0.0)) throw std::invalid_argument("dt must be positive");
        if (!(opts.horizon >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
        e.dt = opts.dt;
        e.total_steps = std::lround(opts.horizon / opts.dt);
        const double fnorm = e.f.cwiseAbs().rowwise().sum().maxCoeff();
        if (opts.dt * fnorm > 0.5)
            warnings.push_back("dt * ||F|| = " + format_double(opts.dt * fnorm) + " exceeds 0.5; reduce dt");
    } else {
        if (opts.steps < 0) throw std::invalid_argument("steps must be nonnegative");
        e.total_steps = opts.steps;
    }
    for (long s = 0; s <= e.total_steps; s += opts.record_every) e.record_steps.push_back(s);
    if (e.record_steps.back() != e.total_steps) e.record_steps.push_back(e.total_steps);
    return e;
}

std::vector<ChunkOut> run_chunks(const Engine& e, const SimOptions& opts) {
    const Philox4x32 rng(opts.seed);
    const long nchunks = (opts.paths + kChunk - 1) / kChunk;
    std::vector<ChunkOut> chunks(static_cast<std::size_t>(nchunks));
    std::atomic<long> next{0};
    auto worker = [&] {
        for (long ch = next++; ch < nchunks; ch = next++) {
            const long first = ch * kChunk;
            chunks[static_cast<std::size_t>(ch)] = e.run(rng, first, std::min(kChunk, opts.paths - first));
        }
    };
    const int nthreads = static_cast<int>(std::clamp<long>(opts.jobs, 1, nchunks));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return chunks;
}

EnsembleStats reduce(const Engine& e, const std::vector<ChunkOut>& chunks, const SimOptions& opts) {
    EnsembleStats st;
    st.paths = opts.paths;
    st.seed = opts.seed;
    const auto np = static_cast<double>(opts.paths);
    for (std::size_t r = 0; r < e.record_steps.size(); ++r) {
        double s1 = 0.0, s2 = 0.0;
        for (const auto& ch : chunks) {
            s1 += ch.sum_ms[r];
            s2 += ch.sum_ms2[r];
        }
        const double mean = s1 / np;
        const double var = opts.paths > 1 ? std::max(0.0, (s2 - np * mean * mean) / (np - 1.0)) : 0.0;
        st.times.push_back(e.domain == TimeDomain::continuous ? static_cast<double>(e.record_steps[r]) * e.dt
                                                              : static_cast<double>(e.record_steps[r]));
        st.mean_square.push_back(mean);
        st.stderr_.push_back(std::sqrt(var / np));
    }
    return st;
}

}  // namespace

EnsembleStats simulate(const StochasticSystem& sys, const Matrix& k, const SimOptions& opts) {
    std::vector<std::string> warnings;
    const Engine e = make_engine(sys, k, opts, warnings);
    EnsembleStats st = reduce(e, run_chunks(e, opts), opts);
    st.warnings = std::move(warnings);
    return st;
}

CostEstimate empirical_cost(const StochasticSystem& sys, const Matrix& k, const Matrix& q, const Matrix& r,
                            const SimOptions& opts) {
    CostEstimate est;
    Engine e = make_engine(sys, k, opts, est.warnings);
    if (q.rows() != sys.states() || q.cols() != sys.states() || r.rows() != sys.inputs() || r.cols() != sys.inputs())
        throw std::invalid_argument("Q or R has the wrong size");
    const Matrix w = symmetrize(q + k.transpose() * r * k);
    e.weight = &w;
    // Only the final time is needed for the tail estimate.
    e.record_steps = {e.total_steps};

    const MsReport rep = ms_stable(sys, k);
    if (!rep.stable) est.warnings.push_back("closed loop is not mean-square stable; the estimate diverges");

    const auto chunks = run_chunks(e, opts);
    double s1 = 0.0, s2 = 0.0;
    for (const auto& ch : chunks)
        for (double v : ch.cost) {
            s1 += v;
            s2 += v * v;
        }
    const auto np = static_cast<double>(opts.paths);
    est.value = s1 / np;
    const double var = opts.paths > 1 ? std::max(0.0, (s2 - np * est.value * est.value) / (np - 1.0)) : 0.0;
    est.stderr_ = std::sqrt(var / np);

    const EnsembleStats last = reduce(e, chunks, opts);
    const double ms_end = last.mean_square.back();
    if (ms_end == 0.0) {
        est.tail_estimate = 0.0;
    } else if (rep.stable && rep.margin > 0.0) {
        est.tail_estimate = std::max(0.0, max_eigenvalue_sym(w)) * ms_end / rep.margin;
    } else {
        est.tail_estimate = std::numeric_limits<double>::infinity();
    }
    return est;
}

std::string ensemble_to_csv(const EnsembleStats& stats) {
    std::string out = "time,mean_square,stderr\n";
    for (std::size_t i = 0; i < stats.times.size(); ++i)
        out += format_double(stats.times[i]) + "," + format_double(stats.mean_square[i]) + "," +
               format_double(stats.stderr_[i]) + "\n";
    return out;
}

}  // namespace sparselmi
