#include "sparselmi/powergrid.hpp"

#include <charconv>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace sparselmi {

namespace {

std::map<int, std::size_t> index_buses(const GridNetwork& net) {
    std::map<int, std::size_t> idx;
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        if (!idx.emplace(net.buses[k].id, k).second)
            throw NetworkError("duplicate bus id " + std::to_string(net.buses[k].id));
    }
    return idx;
}

}  // namespace

std::vector<std::string> validate_network(const GridNetwork& net) {
    const auto idx = index_buses(net);
    for (const Bus& b : net.buses) {
        const std::string tag = "bus " + std::to_string(b.id);
        if (!(b.damping > 0.0)) throw NetworkError(tag + ": damping must be positive");
        if (b.kind == BusKind::gen) {
            if (!(b.inertia_mean > 0.0)) throw NetworkError(tag + ": inertia_mean must be positive");
            if (!(b.sigma_rel >= 0.0)) throw NetworkError(tag + ": sigma_rel must be nonnegative");
        }
    }
    for (const Line& l : net.lines) {
        const std::string tag = "line " + std::to_string(l.from) + "-" + std::to_string(l.to);
        if (!idx.count(l.from) || !idx.count(l.to)) throw NetworkError(tag + ": references an unknown bus");
        if (l.from == l.to) throw NetworkError(tag + ": self-loop");
        if (!(l.susceptance > 0.0)) throw NetworkError(tag + ": susceptance must be positive");
    }
    if (net.infinite_bus && !idx.count(*net.infinite_bus))
        throw NetworkError("infinite bus " + std::to_string(*net.infinite_bus) + " is not a bus");

    std::vector<std::string> warnings;
    // Connectivity of the network without the infinite bus.
    std::vector<std::size_t> parent(net.buses.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    for (const Line& l : net.lines) {
        if (net.infinite_bus && (l.from == *net.infinite_bus || l.to == *net.infinite_bus)) continue;
        parent[find(idx.at(l.from))] = find(idx.at(l.to));
    }
    std::set<std::size_t> roots;
    for (std::size_t k = 0; k < net.buses.size(); ++k)
        if (!net.infinite_bus || net.buses[k].id != *net.infinite_bus) roots.insert(find(k));
    if (roots.size() > 1)
        warnings.push_back("network has " + std::to_string(roots.size()) +
                           " components once the infinite bus is removed");
    return warnings;
}

Matrix laplacian(const GridNetwork& net) {
    validate_network(net);
    const auto idx = index_buses(net);
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    Matrix l = Matrix::Zero(n, n);
    for (const Line& ln : net.lines) {
        const auto i = static_cast<Eigen::Index>(idx.at(ln.from));
        const auto j = static_cast<Eigen::Index>(idx.at(ln.to));
        l(i, j) -= ln.susceptance;
        l(j, i) -= ln.susceptance;
        l(i, i) += ln.susceptance;
        l(j, j) += ln.susceptance;
    }
    return l;
}

StochasticSystem build_swing_system(const GridNetwork& net, const SwingOptions& opts, SwingLayout* layout) {
    const Matrix lfull = laplacian(net);
    if (opts.sigma_rel && !(*opts.sigma_rel >= 0.0)) throw NetworkError("sigma_rel must be nonnegative");

    std::vector<Eigen::Index> gi, li;
    SwingLayout lay;
    for (std::size_t k = 0; k < net.buses.size(); ++k) {
        const Bus& b = net.buses[k];
        if (net.infinite_bus && b.id == *net.infinite_bus) continue;
        if (b.kind == BusKind::gen) {
            gi.push_back(static_cast<Eigen::Index>(k));
            lay.generators.push_back(b.id);
        } else {
            li.push_back(static_cast<Eigen::Index>(k));
            lay.loads.push_back(b.id);
        }
    }
    if (gi.empty()) throw NetworkError("network has no generator buses");

    const auto g = static_cast<Eigen::Index>(gi.size());
    const auto nl = static_cast<Eigen::Index>(li.size());
    const Eigen::Index n = 2 * g + nl;
    auto block = [&](const std::vector<Eigen::Index>& r, const std::vector<Eigen::Index>& c) {
        Matrix out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
        for (std::size_t i = 0; i < r.size(); ++i)
            for (std::size_t j = 0; j < c.size(); ++j) out(i, j) = lfull(r[i], c[j]);
        return out;
    };
    const Matrix lgg = block(gi, gi), lgl = block(gi, li), llg = block(li, gi), lll = block(li, li);
    Vector minv(g), dg(g), dl(nl), sigma(g);
    for (Eigen::Index k = 0; k < g; ++k) {
        const Bus& b = net.buses[static_cast<std::size_t>(gi[k])];
        minv(k) = 1.0 / b.inertia_mean;
        dg(k) = b.damping;
        sigma(k) = opts.sigma_rel.value_or(b.sigma_rel) * minv(k);
    }
    for (Eigen::Index k = 0; k < nl; ++k) dl(k) = net.buses[static_cast<std::size_t>(li[k])].damping;

    StochasticSystem sys;
    sys.domain = TimeDomain::continuous;
    sys.a0 = Matrix::Zero(n, n);
    sys.a0.block(0, g, g, g).setIdentity();
    sys.a0.block(g, 0, g, g) = -(minv.asDiagonal() * lgg);
    sys.a0.block(g, g, g, g) = -(minv.cwiseProduct(dg)).asDiagonal().toDenseMatrix();
    if (nl > 0) {
        sys.a0.block(g, 2 * g, g, nl) = -(minv.asDiagonal() * lgl);
        sys.a0.block(2 * g, 0, nl, g) = -(dl.cwiseInverse().asDiagonal() * llg);
        sys.a0.block(2 * g, 2 * g, nl, nl) = -(dl.cwiseInverse().asDiagonal() * lll);
    }
    sys.b0 = Matrix::Zero(n, g);
    if (opts.drift_input) sys.b0.block(g, 0, g, g) = minv.asDiagonal();

    const double sign = opts.noise_sign == NoiseSign::printed ? 1.0 : -1.0;
    for (Eigen::Index k = 0; k < g; ++k) {
        if (sigma(k) == 0.0) continue;
        NoiseChannel ch;
        ch.intensity = sigma(k);
        Matrix a = Matrix::Zero(n, n);
        a.block(g + k, 0, 1, g) = sign * lgg.row(k);
        a(g + k, g + k) = sign * dg(k);
        if (nl > 0) a.block(g + k, 2 * g, 1, nl) = sign * lgl.row(k);
        Matrix b = Matrix::Zero(n, g);
        b(g + k, k) = 1.0;
        ch.state = a;
        ch.input = b;
        sys.channels.push_back(std::move(ch));
    }
    sys.sigma0 = opts.sigma0.value_or(Matrix(0.1 * Matrix::Identity(n, n)));
    validate(sys);
    if (layout) *layout = std::move(lay);
    return sys;
}

// ---------------------------------------------------------------------------
// Network file
//
//   # leading comment lines are preserved
//   [buses]
//   id, kind, inertia_mean, sigma_rel, damping      (load: id, load, -, -, damping)
//   [lines]
//   from, to, susceptance
//   [grounding]
//   infinite_bus = id
//
// Fields are separated by ", " when written; the reader accepts any spacing.
// '#' starts a comment anywhere; comments after the first section are dropped.

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
    throw NetworkError("line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_fields(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(',', start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

int parse_int(const std::string& s, std::size_t line, const char* what) {
    int v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || ptr != end) fail(line, std::string(what) + " is not an integer: '" + s + "'");
    return v;
}

double parse_num(const std::string& s, std::size_t line, const char* what) {
    try {
        return parse_double(s);
    } catch (const std::exception&) {
        fail(line, std::string(what) + " is not a number: '" + s + "'");
    }
}

}  // namespace

GridNetwork parse_network(std::string_view text) {
    GridNetwork net;
    enum class Section { none, buses, lines, grounding } section = Section::none;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (section == Section::none && !raw.empty() && raw[0] == '#') {
            net.header.push_back(raw);
            continue;
        }
        std::string_view view = raw;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        const std::string s = trim(view);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s == "[buses]") section = Section::buses;
            else if (s == "[lines]") section = Section::lines;
            else if (s == "[grounding]") section = Section::grounding;
            else fail(lineno, "unknown section " + s);
            continue;
        }
        switch (section) {
            case Section::none: fail(lineno, "data before the first section");
            case Section::buses: {
                const auto f = split_fields(s);
                if (f.size() != 5) fail(lineno, "bus needs 5 fields (id, kind, inertia_mean, sigma_rel, damping)");
                Bus b;
                b.id = parse_int(f[0], lineno, "bus id");
                if (f[1] == "gen") {
                    b.kind = BusKind::gen;
                    b.inertia_mean = parse_num(f[2], lineno, "inertia_mean");
                    b.sigma_rel = parse_num(f[3], lineno, "sigma_rel");
                } else if (f[1] == "load") {
                    b.kind = BusKind::load;
                    if (f[2] != "-" || f[3] != "-") fail(lineno, "load bus inertia fields must be '-'");
                } else {
                    fail(lineno, "bus kind must be gen or load, got '" + f[1] + "'");
                }
                b.damping = parse_num(f[4], lineno, "damping");
                net.buses.push_back(b);
                break;
            }
            case Section::lines: {
                const auto f = split_fields(s);
                if (f.size() != 3) fail(lineno, "line needs 3 fields (from, to, susceptance)");
                net.lines.push_back({parse_int(f[0], lineno, "from"), parse_int(f[1], lineno, "to"),
                                     parse_num(f[2], lineno, "susceptance")});
                break;
            }
            case Section::grounding: {
                const auto eq = s.find('=');
                if (eq == std::string::npos || trim(s.substr(0, eq)) != "infinite_bus")
                    fail(lineno, "expected 'infinite_bus = <id>'");
                if (net.infinite_bus) fail(lineno, "infinite_bus given twice");
                net.infinite_bus = parse_int(trim(s.substr(eq + 1)), lineno, "infinite_bus");
                break;
            }
        }
    }
    try {
        validate_network(net);
    } catch (const NetworkError& e) {
        throw NetworkError(std::string("invalid network: ") + e.what());
    }
    return net;
}

std::string format_network(const GridNetwork& net) {
    std::string out;
    for (const auto& h : net.header) out += h + "\n";
    out += "[buses]\n";
    for (const Bus& b : net.buses) {
        out += std::to_string(b.id);
        if (b.kind == BusKind::gen) {
            out += ", gen, " + format_double(b.inertia_mean) + ", " + format_double(b.sigma_rel);
        } else {
            out += ", load, -, -";
        }
        out += ", " + format_double(b.damping) + "\n";
    }
    out += "\n[lines]\n";
    for (const Line& l : net.lines)
        out += std::to_string(l.from) + ", " + std::to_string(l.to) + ", " + format_double(l.susceptance) + "\n";
    if (net.infinite_bus) out += "\n[grounding]\ninfinite_bus = " + std::to_string(*net.infinite_bus) + "\n";
    return out;
}

GridNetwork read_network(const std::filesystem::path& path) {
    try {
        return parse_network(read_text_file(path));
    } catch (const NetworkError& e) {
        throw NetworkError(path.string() + ": " + e.what());
    }
}

void write_network(const std::filesystem::path& path, const GridNetwork& net) {
    write_text_file(path, format_network(net));
}

}  // namespace sparselmi
