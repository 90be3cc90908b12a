#include "sparselmi/model.hpp"

#include <json.hpp>

#include <sstream>

namespace sparselmi {

using ordered_json = nlohmann::ordered_json;

const char* to_string(TimeDomain d) {
    return d == TimeDomain::continuous ? "continuous" : "discrete";
}

TimeDomain parse_time_domain(std::string_view text) {
    if (text == "continuous") return TimeDomain::continuous;
    if (text == "discrete") return TimeDomain::discrete;
    throw ModelError({"time_domain must be \"continuous\" or \"discrete\", got \"" +
                      std::string(text) + "\""});
}

namespace {

std::string join_violations(const std::vector<std::string>& v) {
    std::string out = "invalid system:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
}

std::string dims(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

ModelError::ModelError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

void validate(const StochasticSystem& sys) {
    std::vector<std::string> bad;
    const auto n = sys.a0.rows();
    if (n == 0 || sys.a0.cols() != n) bad.push_back("A0 must be square and nonempty, got " + dims(sys.a0));
    if (sys.b0.rows() != n || sys.b0.cols() == 0)
        bad.push_back("B0 must have " + std::to_string(n) + " rows and at least one column, got " + dims(sys.b0));
    if (!sys.a0.allFinite()) bad.push_back("A0 has non-finite entries");
    if (!sys.b0.allFinite()) bad.push_back("B0 has non-finite entries");
    const auto m = sys.b0.cols();

    for (std::size_t i = 0; i < sys.channels.size(); ++i) {
        const auto& ch = sys.channels[i];
        const std::string tag = "channel " + std::to_string(i) + ": ";
        if (!(ch.intensity >= 0.0) || !std::isfinite(ch.intensity))
            bad.push_back(tag + "intensity must be finite and nonnegative");
        if (!ch.state && !ch.input) bad.push_back(tag + "needs a state matrix, an input matrix, or both");
        if (ch.state && (ch.state->rows() != n || ch.state->cols() != n))
            bad.push_back(tag + "state matrix must be " + std::to_string(n) + "x" + std::to_string(n) +
                          ", got " + dims(*ch.state));
        if (ch.input && (ch.input->rows() != n || ch.input->cols() != m))
            bad.push_back(tag + "input matrix must be " + std::to_string(n) + "x" + std::to_string(m) +
                          ", got " + dims(*ch.input));
        if ((ch.state && !ch.state->allFinite()) || (ch.input && !ch.input->allFinite()))
            bad.push_back(tag + "non-finite entries");
    }

    if (sys.sigma0.rows() != n || sys.sigma0.cols() != n) {
        bad.push_back("Sigma0 must be " + std::to_string(n) + "x" + std::to_string(n) + ", got " +
                      dims(sys.sigma0));
    } else if (!sys.sigma0.allFinite()) {
        bad.push_back("Sigma0 has non-finite entries");
    } else if (n > 0) {
        const double scale = std::max(1.0, sys.sigma0.cwiseAbs().maxCoeff());
        if ((sys.sigma0 - sys.sigma0.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
            bad.push_back("Sigma0 not symmetric");
        } else if (min_eigenvalue_sym(sys.sigma0) < -1e-10 * scale) {
            bad.push_back("Sigma0 not PSD");
        }
    }
    if (!bad.empty()) throw ModelError(std::move(bad));
}

ClosedLoop close_loop(const StochasticSystem& sys, const Matrix& k) {
    if (k.rows() != sys.inputs() || k.cols() != sys.states()) {
        throw ModelError({"gain must be " + std::to_string(sys.inputs()) + "x" +
                          std::to_string(sys.states()) + ", got " + dims(k)});
    }
    ClosedLoop cl;
    cl.drift = sys.a0 + sys.b0 * k;
    cl.diffusion.reserve(sys.channels.size());
    for (const auto& ch : sys.channels) {
        Matrix d = Matrix::Zero(sys.states(), sys.states());
        if (ch.state) d += *ch.state;
        if (ch.input) d += *ch.input * k;
        cl.diffusion.push_back({ch.intensity, std::move(d)});
    }
    return cl;
}

namespace {

ordered_json matrix_json(const Matrix& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix json_matrix(const ordered_json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) throw ModelError({field + ": expected a nonempty array of rows"});
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    if (cols == 0) throw ModelError({field + ": expected nonempty rows"});
    Matrix m(j.size(), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw ModelError({field + ": row " + std::to_string(i) + " is ragged"});
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[i][c].is_number()) throw ModelError({field + ": non-numeric entry"});
            m(i, c) = j[i][c].get<double>();
        }
    }
    return m;
}

void reject_unknown(const ordered_json& obj, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ModelError({where + ": unknown field \"" + key + "\""});
    }
}

}  // namespace

std::string system_to_json(const StochasticSystem& sys) {
    ordered_json j;
    j["time_domain"] = to_string(sys.domain);
    j["A0"] = matrix_json(sys.a0);
    j["B0"] = matrix_json(sys.b0);
    ordered_json chans = ordered_json::array();
    for (const auto& ch : sys.channels) {
        ordered_json c;
        c["intensity"] = ch.intensity;
        if (ch.state) c["A"] = matrix_json(*ch.state);
        if (ch.input) c["B"] = matrix_json(*ch.input);
        chans.push_back(std::move(c));
    }
    j["channels"] = std::move(chans);
    j["Sigma0"] = matrix_json(sys.sigma0);
    return j.dump(2) + "\n";
}

StochasticSystem system_from_json(std::string_view text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelError({std::string("malformed JSON: ") + e.what()});
    }
    if (!j.is_object()) throw ModelError({"system file must contain a JSON object"});
    reject_unknown(j, {"time_domain", "A0", "B0", "channels", "Sigma0"}, "system");
    for (const char* f : {"time_domain", "A0", "B0", "Sigma0"})
        if (!j.contains(f)) throw ModelError({std::string("missing field \"") + f + "\""});

    StochasticSystem sys;
    if (!j["time_domain"].is_string()) throw ModelError({"time_domain must be a string"});
    sys.domain = parse_time_domain(j["time_domain"].get<std::string>());
    sys.a0 = json_matrix(j["A0"], "A0");
    sys.b0 = json_matrix(j["B0"], "B0");
    sys.sigma0 = json_matrix(j["Sigma0"], "Sigma0");
    if (j.contains("channels")) {
        if (!j["channels"].is_array()) throw ModelError({"channels must be an array"});
        std::size_t idx = 0;
        for (const auto& c : j["channels"]) {
            const std::string where = "channels[" + std::to_string(idx++) + "]";
            if (!c.is_object()) throw ModelError({where + ": expected object"});
            reject_unknown(c, {"intensity", "A", "B"}, where);
            if (!c.contains("intensity") || !c["intensity"].is_number())
                throw ModelError({where + ": missing numeric intensity"});
            NoiseChannel ch;
            ch.intensity = c["intensity"].get<double>();
            if (c.contains("A")) ch.state = json_matrix(c["A"], where + ".A");
            if (c.contains("B")) ch.input = json_matrix(c["B"], where + ".B");
            sys.channels.push_back(std::move(ch));
        }
    }
    validate(sys);
    return sys;
}

StochasticSystem read_system(const std::filesystem::path& path) {
    return system_from_json(read_text_file(path));
}

void write_system(const std::filesystem::path& path, const StochasticSystem& sys) {
    write_text_file(path, system_to_json(sys));
}

}  // namespace sparselmi
