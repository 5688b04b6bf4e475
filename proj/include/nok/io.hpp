#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nok/design.hpp"
#include "nok/engine.hpp"
#include "nok/errors.hpp"
#include "nok/prox.hpp"

namespace nok {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// CSV matrices (rows are samples; stored column-wise internally)
// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<double> parse_cell(std::string_view cell) {
    std::size_t begin = 0;
    std::size_t end = cell.size();
    while (begin < end && (cell[begin] == ' ' || cell[begin] == '\t')) ++begin;
    while (end > begin && (cell[end - 1] == ' ' || cell[end - 1] == '\t' || cell[end - 1] == '\r'))
        --end;
    if (begin == end) return std::nullopt;
    double value = 0.0;
    const char* first = cell.data() + begin;
    const char* last = cell.data() + end;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace detail

/// Load a CSV of finite reals. Rows are samples; the result is d x S with
/// samples as columns. A single leading non-numeric row is skipped as a
/// header.
inline MatrixXd load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    std::size_t width = 0;
    bool header_allowed = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        std::vector<double> row;
        row.reserve(cells.size());
        bool ok = true;
        std::size_t bad_col = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto value = detail::parse_cell(cells[c]);
            if (!value) {
                ok = false;
                bad_col = c + 1;
                break;
            }
            row.push_back(*value);
        }
        if (!ok) {
            if (header_allowed && rows.empty()) {
                header_allowed = false;
                continue;  // header row
            }
            throw ParseError("cell does not parse as a finite real", line_no, static_cast<long>(bad_col));
        }
        if (rows.empty()) {
            width = row.size();
        } else if (row.size() != width) {
            throw ParseError("ragged row (expected " + std::to_string(width) + " columns, got " +
                                 std::to_string(row.size()) + ")",
                             line_no);
        }
        rows.push_back(std::move(row));
        header_allowed = false;
    }
    if (rows.empty()) throw ParseError("no numeric rows in '" + path + "'");
    MatrixXd out(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t s = 0; s < rows.size(); ++s)
        for (std::size_t i = 0; i < width; ++i)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = rows[s][i];
    return out;
}

/// Write samples (columns of X) as CSV rows with 17 significant digits,
/// round-trip exact for doubles.
inline void save_matrix(const std::string& path, const MatrixXd& X) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    char buf[64];
    for (Eigen::Index s = 0; s < X.cols(); ++s) {
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", X(i, s));
            out << buf << (i + 1 < X.rows() ? "," : "");
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// JSON serialization of domain objects
// ---------------------------------------------------------------------------

inline json design_to_json(const StructuredDesign& design) {
    json j;
    j["n"] = design.n();
    j["m"] = design.m();
    j["lambda_set"] = design.index_set();
    if (design.seed())
        j["seed_or_null"] = *design.seed();
    else
        j["seed_or_null"] = nullptr;
    return j;
}

/// Rebuild a design from {"n","m","lambda_set","seed_or_null"}; B is always
/// reconstructed, never stored.
inline StructuredDesign design_from_json(const nlohmann::json& j) {
    if (!j.contains("n") || !j.contains("m")) throw ParseError("design needs fields 'n' and 'm'");
    const long n = j.at("n").get<long>();
    const long m = j.at("m").get<long>();
    StructuredDesign design(n, m);
    if (j.contains("lambda_set")) {
        const auto stored = j.at("lambda_set").get<std::vector<long>>();
        if (stored != design.index_set())
            throw IntegrityError("stored lambda_set does not match the (n, m) construction");
    }
    if (j.contains("seed_or_null") && !j.at("seed_or_null").is_null())
        return randomize_design(design, j.at("seed_or_null").get<std::uint64_t>());
    return design;
}

inline json penalty_to_json(const Penalty& p) {
    json j;
    j["family"] = family_name(p.family);
    j["lambda"] = p.lambda;
    if (p.family == PenaltyFamily::Mcp || p.family == PenaltyFamily::CappedL1 ||
        p.family == PenaltyFamily::Scad)
        j["gamma"] = p.gamma;
    if (p.family == PenaltyFamily::TopK) j["k"] = p.k;
    return j;
}

inline Penalty penalty_from_json(const nlohmann::json& j) {
    if (!j.contains("family")) throw ParseError("penalty needs a 'family' field");
    Penalty p;
    p.family = family_from_name(j.at("family").get<std::string>());
    p.lambda = j.value("lambda", 0.0);
    p.gamma = j.value("gamma", 0.0);
    p.k = j.value("k", 0L);
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct ToleranceSet {
    double descent = 1e-10;
    double identity = 1e-12;
    double rate = 1e-8;
    double ksparse = 1e-10;
    double alternating = 1e-9;
};

/// Everything a CLI invocation needs; all randomness flows from `seed`.
struct RunConfig {
    long n = 13;
    long m = 4;
    std::optional<std::uint64_t> design_seed;  // diagonal randomization
    Penalty penalty = Penalty::l1(0.1);
    long T = 50;
    long T1 = 5;
    long T2 = 10;
    bool gain_inv_sqrt_n = false;  // input_gain: 1 or 1/sqrt(N)
    std::uint64_t seed = 0;
    long seeds_per_check = 10;
    long threads = 1;
    ToleranceSet tolerances;

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig cfg;
        if (j.contains("design")) {
            const auto& d = j.at("design");
            if (d.is_string()) {
                // reference to a standalone design file
                std::ifstream in(d.get<std::string>());
                if (!in) throw IoError("cannot open design file '" + d.get<std::string>() + "'");
                nlohmann::json dj;
                try {
                    dj = nlohmann::json::parse(in);
                } catch (const nlohmann::json::parse_error& e) {
                    throw ParseError("design file '" + d.get<std::string>() + "': " + e.what());
                }
                cfg.n = dj.at("n").get<long>();
                cfg.m = dj.at("m").get<long>();
                if (dj.contains("seed_or_null") && !dj.at("seed_or_null").is_null())
                    cfg.design_seed = dj.at("seed_or_null").get<std::uint64_t>();
            } else {
                cfg.n = d.value("n", cfg.n);
                cfg.m = d.value("m", cfg.m);
                if (d.contains("seed") && !d.at("seed").is_null())
                    cfg.design_seed = d.at("seed").get<std::uint64_t>();
            }
        }
        if (j.contains("penalty")) cfg.penalty = penalty_from_json(j.at("penalty"));
        cfg.T = j.value("T", cfg.T);
        cfg.T1 = j.value("T1", cfg.T1);
        cfg.T2 = j.value("T2", cfg.T2);
        if (j.contains("input_gain")) {
            const auto& g = j.at("input_gain");
            if (g.is_string()) {
                if (g.get<std::string>() != "inv_sqrt_N")
                    throw ParseError("input_gain must be 1 or \"inv_sqrt_N\"");
                cfg.gain_inv_sqrt_n = true;
            } else if (g.is_number()) {
                if (g.get<double>() != 1.0) throw ParseError("input_gain must be 1 or \"inv_sqrt_N\"");
            } else {
                throw ParseError("input_gain must be 1 or \"inv_sqrt_N\"");
            }
        }
        cfg.seed = j.value("seed", cfg.seed);
        cfg.seeds_per_check = j.value("seeds_per_check", cfg.seeds_per_check);
        cfg.threads = j.value("threads", cfg.threads);
        if (j.contains("tolerances")) {
            const auto& t = j.at("tolerances");
            cfg.tolerances.descent = t.value("descent", cfg.tolerances.descent);
            cfg.tolerances.identity = t.value("identity", cfg.tolerances.identity);
            cfg.tolerances.rate = t.value("rate", cfg.tolerances.rate);
            cfg.tolerances.ksparse = t.value("ksparse", cfg.tolerances.ksparse);
            cfg.tolerances.alternating = t.value("alternating", cfg.tolerances.alternating);
        }
        cfg.validate();
        return cfg;
    }

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config '" + path + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("config '" + path + "': " + e.what());
        }
        return from_json(j);
    }

    void validate() const {
        build_index_set(n, m);  // n prime, m | n-1
        penalty.validate();
        if (T < 1 || T1 < 1 || T2 < 0) throw InvalidInputError("T and T1 must be >= 1, T2 >= 0");
        if (seeds_per_check < 1) throw InvalidInputError("seeds_per_check must be >= 1");
        if (threads < 1) throw InvalidInputError("threads must be >= 1");
    }

    json to_json() const {
        json j;
        json d;
        d["n"] = n;
        d["m"] = m;
        if (design_seed)
            d["seed"] = *design_seed;
        else
            d["seed"] = nullptr;
        j["design"] = d;
        j["penalty"] = penalty_to_json(penalty);
        j["T"] = T;
        j["T1"] = T1;
        j["T2"] = T2;
        if (gain_inv_sqrt_n)
            j["input_gain"] = "inv_sqrt_N";
        else
            j["input_gain"] = 1;
        j["seed"] = seed;
        j["seeds_per_check"] = seeds_per_check;
        j["threads"] = threads;
        json t;
        t["descent"] = tolerances.descent;
        t["identity"] = tolerances.identity;
        t["rate"] = tolerances.rate;
        t["ksparse"] = tolerances.ksparse;
        t["alternating"] = tolerances.alternating;
        j["tolerances"] = t;
        return j;
    }

    std::shared_ptr<const StructuredDesign> make_design() const {
        if (design_seed)
            return std::make_shared<const StructuredDesign>(
                randomize_design(StructuredDesign(n, m), *design_seed));
        return std::make_shared<const StructuredDesign>(n, m);
    }

    NokConfig make_nok_config() const {
        auto design = make_design();
        const double gain =
            gain_inv_sqrt_n ? 1.0 / std::sqrt(static_cast<double>(design->samples())) : 1.0;
        return NokConfig::make(std::move(design), penalty, T, gain);
    }
};

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool passed = false;
    double max_violation = 0.0;
    double tolerance = 0.0;
};

inline json make_report(const json& config, const std::vector<CheckResult>& checks,
                        const json& traces = json::object(), const json& bounds = json::object(),
                        std::string timestamp = {}) {
    json j;
    j["version"] = "1";
    j["timestamp"] = std::move(timestamp);
    j["config"] = config;
    j["checks"] = json::array();
    for (const CheckResult& c : checks) {
        json e;
        e["name"] = c.name;
        e["passed"] = c.passed;
        e["max_violation"] = c.max_violation;
        e["tolerance"] = c.tolerance;
        j["checks"].push_back(e);
    }
    j["traces"] = traces;
    j["bounds"] = bounds;
    return j;
}

inline void write_report(const json& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << report.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace nok
