// SDPA sparse format (.dat-s):
//
//   mDIM
//   nBLOCK
//   bLOCKsTRUCT      (negative size marks a diagonal/LP block)
//   c_1 ... c_mDIM
//   matno blkno i j value     (1-based, i <= j, F_0 first)
//
// SDPA solves  min c^T x  s.t.  sum_i F_i x_i - F_0 >= 0.  Our slack is
// h - G x, hence F_0 = -mat(h) and F_i = -mat(G_i).

#include "sparselmi/conic.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sparselmi {

namespace {

struct Entry {
    int mat;
    int blk;
    int i;
    int j;
    double val;
};

}  // namespace

std::string to_sdpa(const ConicProgram& p) {
    p.check();
    // Collect LP rows as (constant, row of G) pairs in the slack convention.
    struct LpRow {
        double h;
        std::vector<std::pair<int, double>> g;
    };
    std::vector<LpRow> lp;
    const SparseMatrix gt = p.g.transpose();
    const SparseMatrix at = p.a.transpose();
    auto g_row = [&](int r) {
        std::vector<std::pair<int, double>> out;
        for (SparseMatrix::InnerIterator it(gt, r); it; ++it) out.emplace_back(it.row(), it.value());
        return out;
    };
    auto negate = [](std::vector<std::pair<int, double>> v) {
        for (auto& t : v) t.second = -t.second;
        return v;
    };
    // A x = b as  (b - A x >= 0) and (A x - b >= 0).
    for (int r = 0; r < p.a.rows(); ++r) {
        std::vector<std::pair<int, double>> row;
        for (SparseMatrix::InnerIterator it(at, r); it; ++it) row.emplace_back(it.row(), it.value());
        lp.push_back({p.b(r), row});
        lp.push_back({-p.b(r), negate(row)});
    }

    struct Psd {
        int side;
        std::vector<Entry> entries;  // mat/i/j/val, blk filled later
    };
    std::vector<Psd> psd;
    auto add_psd_entry = [](Psd& blk, int mat, int i, int j, double val) {
        if (val == 0.0) return;
        if (i > j) std::swap(i, j);
        blk.entries.push_back({mat, 0, i + 1, j + 1, val});
    };

    int off = 0;
    for (const auto& blk : p.blocks) {
        const int len = blk.slack_size();
        switch (blk.kind) {
            case ConeKind::zero:
                for (int k = 0; k < len; ++k) {
                    auto row = g_row(off + k);
                    lp.push_back({p.h(off + k), row});
                    lp.push_back({-p.h(off + k), negate(row)});
                }
                break;
            case ConeKind::nonneg:
                for (int k = 0; k < len; ++k) lp.push_back({p.h(off + k), g_row(off + k)});
                break;
            case ConeKind::psd: {
                Psd out{blk.dim, {}};
                const double r2 = 1.0 / std::sqrt(2.0);
                for (int j = 0; j < blk.dim; ++j)
                    for (int i = j; i < blk.dim; ++i) {
                        const int row = off + svec_index(i, j, blk.dim);
                        const double sc = (i == j) ? 1.0 : r2;
                        add_psd_entry(out, 0, i, j, -sc * p.h(row));
                        for (const auto& [v, g] : g_row(row)) add_psd_entry(out, v + 1, i, j, -sc * g);
                    }
                psd.push_back(std::move(out));
                break;
            }
            case ConeKind::soc: {
                // Arrow matrix [[t, u^T], [u, t I]].
                Psd out{blk.dim, {}};
                for (int k = 0; k < blk.dim; ++k) {
                    const int row = off + k;
                    auto g = g_row(row);
                    if (k == 0) {
                        for (int d = 0; d < blk.dim; ++d) {
                            add_psd_entry(out, 0, d, d, -p.h(row));
                            for (const auto& [v, val] : g) add_psd_entry(out, v + 1, d, d, -val);
                        }
                    } else {
                        add_psd_entry(out, 0, 0, k, -p.h(row));
                        for (const auto& [v, val] : g) add_psd_entry(out, v + 1, 0, k, -val);
                    }
                }
                psd.push_back(std::move(out));
                break;
            }
        }
        off += len;
    }

    std::vector<int> structure;
    std::vector<Entry> entries;
    int blkno = 0;
    if (!lp.empty()) {
        ++blkno;
        structure.push_back(-static_cast<int>(lp.size()));
        for (std::size_t k = 0; k < lp.size(); ++k) {
            const int d = static_cast<int>(k) + 1;
            if (lp[k].h != 0.0) entries.push_back({0, blkno, d, d, -lp[k].h});
            for (const auto& [v, g] : lp[k].g)
                if (g != 0.0) entries.push_back({v + 1, blkno, d, d, -g});
        }
    }
    for (auto& blk : psd) {
        ++blkno;
        structure.push_back(blk.side);
        for (auto e : blk.entries) {
            e.blk = blkno;
            entries.push_back(e);
        }
    }
    // Merge duplicates (the arrow diagonal may collect several terms) and sort.
    std::map<std::tuple<int, int, int, int>, double> merged;
    for (const auto& e : entries) merged[{e.mat, e.blk, e.i, e.j}] += e.val;

    std::ostringstream out;
    out << p.num_vars << "\n" << structure.size() << "\n";
    for (std::size_t k = 0; k < structure.size(); ++k) out << (k ? " " : "") << structure[k];
    out << "\n";
    for (int v = 0; v < p.num_vars; ++v) out << (v ? " " : "") << format_double(p.c(v));
    out << "\n";
    for (const auto& [key, val] : merged) {
        if (val == 0.0) continue;
        const auto& [mat, blk, i, j] = key;
        out << mat << " " << blk << " " << i << " " << j << " " << format_double(val) << "\n";
    }
    return out.str();
}

void export_sdpa(const ConicProgram& p, const std::filesystem::path& path) {
    write_text_file(path, to_sdpa(p));
}

ConicProgram parse_sdpa(std::string_view text) {
    // Strip leading comment lines, then tokenize with SDPA's punctuation rules.
    std::string body;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (header && !line.empty() && (line.front() == '"' || line.front() == '*')) continue;
        header = false;
        body.append(line);
        body.push_back('\n');
    }
    for (char& ch : body)
        if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
    std::istringstream in(body);

    auto fail = [](const std::string& msg) { throw std::invalid_argument("sdpa: " + msg); };
    int mdim = 0, nblock = 0;
    if (!(in >> mdim >> nblock) || mdim < 0 || nblock <= 0) fail("bad header");
    std::vector<int> structure(nblock);
    for (auto& s : structure)
        if (!(in >> s) || s == 0) fail("bad block structure");

    Vector c(mdim);
    for (int v = 0; v < mdim; ++v) {
        std::string tok;
        if (!(in >> tok)) fail("objective vector truncated");
        c(v) = parse_double(tok);
    }

    ProgramBuilder pb;
    pb.add_variables(mdim);
    for (int v = 0; v < mdim; ++v)
        if (c(v) != 0.0) pb.add_objective(v, c(v));

    // X_blk = sum_i F_i x_i - F_0 >= 0.
    std::vector<std::vector<LinExpr>> blocks(nblock);
    for (int k = 0; k < nblock; ++k) {
        const int side = std::abs(structure[k]);
        blocks[k].resize(structure[k] < 0 ? side : side * (side + 1) / 2);
    }
    int mat = 0, blk = 0, i = 0, j = 0;
    std::string tok;
    while (in >> mat >> blk >> i >> j >> tok) {
        const double val = parse_double(tok);
        if (mat < 0 || mat > mdim || blk < 1 || blk > nblock) fail("entry index out of range");
        const int side = std::abs(structure[blk - 1]);
        if (i < 1 || j < 1 || i > side || j > side) fail("entry position out of range");
        LinExpr term = mat == 0 ? LinExpr(-val) : LinExpr::var(mat - 1, val);
        if (structure[blk - 1] < 0) {
            if (i != j) fail("off-diagonal entry in a diagonal block");
            blocks[blk - 1][i - 1] += term;
        } else {
            blocks[blk - 1][svec_index(i - 1, j - 1, side)] += term;
        }
    }
    if (!in.eof()) fail("trailing garbage in entry list");

    for (int k = 0; k < nblock; ++k) {
        if (structure[k] < 0) {
            pb.add_nonneg(blocks[k]);
        } else {
            pb.add_psd(structure[k], blocks[k]);
        }
    }
    return pb.build();
}

}  // namespace sparselmi
