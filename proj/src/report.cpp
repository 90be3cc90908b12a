#include "sparselmi/report.hpp"

#include <cmath>

namespace sparselmi {

namespace {

// JSON has no infinities or NaN; those become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json index_list(const std::vector<int>& v) {
    Json out = Json::array();
    for (int i : v) out.push_back(i);
    return out;
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json design_to_json(const DesignResult& r) {
    Json j;
    j["K"] = matrix_to_json(r.K);
    j["C"] = r.C ? matrix_to_json(*r.C) : Json(nullptr);
    j["K_full"] = matrix_to_json(r.K_full);
    j["P"] = matrix_to_json(r.P);
    j["Y"] = matrix_to_json(r.Y);
    j["kappa"] = r.kappa ? number(*r.kappa) : Json(nullptr);
    j["gamma"] = r.gamma;
    Json reg;
    reg["kind"] = to_string(r.regularizer.kind);
    reg["gamma"] = r.regularizer.gamma;
    reg["mu"] = r.regularizer.mu ? Json(*r.regularizer.mu) : Json(nullptr);
    j["regularizer"] = reg;
    j["row_support"] = index_list(r.row_support);
    j["col_support"] = index_list(r.col_support);
    j["unremovable_rows"] = index_list(r.unremovable_rows);
    j["zero_columns"] = index_list(r.zero_columns);
    Json oracle;
    oracle["stable"] = r.oracle.stable;
    oracle["margin"] = number(r.oracle.margin);
    oracle["lifted_dimension"] = r.oracle.lifted_dimension;
    oracle["cost"] = r.oracle_cost ? number(*r.oracle_cost) : Json(nullptr);
    j["oracle"] = oracle;
    Json solves = Json::array();
    for (const auto& s : r.solves) {
        Json js;
        js["status"] = s.status;
        js["iterations"] = s.iterations;
        js["runtime_s"] = s.runtime;
        js["primal_residual"] = number(s.primal_residual);
        js["dual_residual"] = number(s.dual_residual);
        js["duality_gap"] = number(s.duality_gap);
        js["objective"] = number(s.objective);
        solves.push_back(std::move(js));
    }
    j["solver"] = solves;
    return j;
}

std::string tradeoff_csv(const std::vector<SweepPoint>& points) {
    std::string out = "gamma,kappa,rel_cost,row_support_size,oracle_margin,runtime_s\n";
    for (const auto& p : points) {
        out += format_double(p.gamma) + ",";
        if (p.result) {
            const auto& r = *p.result;
            out += (r.kappa ? format_double(*r.kappa) : std::string()) + ",";
            out += (std::isfinite(p.rel_cost) ? format_double(p.rel_cost) : std::string()) + ",";
            out += std::to_string(r.row_support.size()) + "," + format_double(r.oracle.margin) + ",";
        } else {
            out += ",,,,";
        }
        out += format_double(p.runtime) + "\n";
    }
    return out;
}

}  // namespace sparselmi
