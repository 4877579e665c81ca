#pragma once

// File formats: Matrix Market graphs, labeled-vertex CSV, run configuration
// JSON, result tables and lwce curves.

#include <gsor/error.hpp>
#include <gsor/graph.hpp>
#include <gsor/lwce_bound.hpp>
#include <gsor/recovery.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace gsor {

// ---------------------------------------------------------------------------
// Text helpers

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto not_space = [](char ch) { return ch != ' ' && ch != '\t' && ch != '\r' && ch != '\n'; };
    while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::vector<std::string_view> split_char(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (char& ch : out)
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    return out;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
    Int v{};
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

/// Accepts everything std::from_chars does, including nan and inf.
inline std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

/// Iterates over lines, tracking the 1-based line number.
class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    bool next(std::string_view& line) {
        if (pos_ > text_.size() || (pos_ == text_.size() && (text_.empty() || text_.back() == '\n'))) return false;
        std::size_t end = text_.find('\n', pos_);
        if (end == std::string_view::npos) end = text_.size();
        line = text_.substr(pos_, end - pos_);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos_ = end + 1;
        ++number_;
        return true;
    }

    std::size_t number() const noexcept { return number_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t number_ = 0;
};

}  // namespace detail

/// Shortest-roundtrip-safe rendering with 17 significant digits; non-finite
/// values print as nan, inf, -inf.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write to " + path.string() + " failed");
}

// ---------------------------------------------------------------------------
// Matrix Market

/// Reads a square coordinate matrix as a weighted undirected graph. Pattern
/// entries get weight 1, diagonal entries are dropped and general matrices are
/// symmetrized as (A + A^T)/2.
inline Graph parse_matrix_market(std::string_view text, Warnings* warnings = nullptr) {
    detail::LineReader reader(text);
    std::string_view line;
    if (!reader.next(line)) throw ParseError("empty input", 1);

    const auto head = detail::split_ws(line);
    if (head.size() != 5 || detail::lower(head[0]) != "%%matrixmarket" || detail::lower(head[1]) != "matrix" ||
        detail::lower(head[2]) != "coordinate")
        throw ParseError("malformed header, expected '%%MatrixMarket matrix coordinate <field> <symmetry>'", 1);
    const std::string field = detail::lower(head[3]);
    const std::string symmetry = detail::lower(head[4]);
    if (field != "real" && field != "integer" && field != "pattern")
        throw ParseError("unsupported field '" + std::string(head[3]) + "'", 1);
    if (symmetry != "symmetric" && symmetry != "general")
        throw ParseError("unsupported symmetry '" + std::string(head[4]) + "'", 1);
    const bool pattern = field == "pattern";
    const bool general = symmetry == "general";

    // Size line.
    std::optional<std::size_t> rows, cols, nnz;
    while (reader.next(line)) {
        const std::string_view t = detail::trim(line);
        if (t.empty() || t.front() == '%') continue;
        const auto tok = detail::split_ws(t);
        if (tok.size() != 3) throw ParseError("size line must hold rows, columns and entry count", reader.number());
        rows = detail::parse_int<std::size_t>(tok[0]);
        cols = detail::parse_int<std::size_t>(tok[1]);
        nnz = detail::parse_int<std::size_t>(tok[2]);
        if (!rows || !cols || !nnz) throw ParseError("malformed size line", reader.number());
        if (*rows != *cols) throw ParseError("adjacency matrix must be square", reader.number());
        if (*rows == 0) throw ParseError("matrix has no rows", reader.number());
        break;
    }
    if (!rows) throw ParseError("missing size line", reader.number() + 1);
    const std::size_t n = *rows;

    std::map<std::pair<std::size_t, std::size_t>, double> general_entries;
    std::vector<Edge> edges;
    std::size_t count = 0, diagonal = 0;
    while (reader.next(line)) {
        const std::string_view t = detail::trim(line);
        if (t.empty() || t.front() == '%') continue;
        const auto tok = detail::split_ws(t);
        const std::size_t expect = pattern ? 2 : 3;
        if (tok.size() != expect)
            throw ParseError("expected " + std::to_string(expect) + " fields per entry", reader.number());
        const auto i = detail::parse_int<std::size_t>(tok[0]);
        const auto j = detail::parse_int<std::size_t>(tok[1]);
        if (!i || !j) throw ParseError("malformed index", reader.number());
        if (*i < 1 || *j < 1 || *i > n || *j > n) throw ParseError("index out of bounds", reader.number());
        double w = 1.0;
        if (field == "integer") {
            const auto v = detail::parse_int<long long>(tok[2]);
            if (!v) throw ParseError("malformed integer value", reader.number());
            w = static_cast<double>(*v);
        } else if (field == "real") {
            const auto v = detail::parse_double(tok[2]);
            if (!v || !std::isfinite(*v)) throw ParseError("malformed real value", reader.number());
            w = *v;
        }
        if (w < 0.0) throw ParseError("negative weight", reader.number());
        ++count;
        if (count > *nnz)
            throw ParseError("more entries than the declared count " + std::to_string(*nnz), reader.number());
        if (*i == *j) {
            ++diagonal;
            continue;
        }
        if (general)
            general_entries[{*i - 1, *j - 1}] += w;
        else
            edges.push_back({*i - 1, *j - 1, w});
    }
    if (count != *nnz)
        throw ParseError("found " + std::to_string(count) + " entries but " + std::to_string(*nnz) + " were declared",
                         reader.number() + 1);
    if (diagonal > 0) warn(warnings, "dropped " + std::to_string(diagonal) + " diagonal entr" +
                                         (diagonal == 1 ? "y" : "ies"));

    if (general) {
        std::size_t asymmetric = 0;
        for (const auto& [key, w] : general_entries) {
            const auto [i, j] = key;
            const auto it = general_entries.find({j, i});
            const double wt = it == general_entries.end() ? 0.0 : it->second;
            if (wt != w) ++asymmetric;
            if (i < j || it == general_entries.end()) edges.push_back({i, j, 0.5 * (w + wt)});
        }
        if (asymmetric > 0)
            warn(warnings, "general matrix is not symmetric (" + std::to_string(asymmetric / 2 + asymmetric % 2) +
                               " pair(s) differ); using (A + A^T)/2");
    }
    return Graph(n, std::move(edges), warnings);
}

inline Graph load_matrix_market(const std::filesystem::path& path, Warnings* warnings = nullptr) {
    return parse_matrix_market(read_file(path), warnings);
}

// ---------------------------------------------------------------------------
// Labels CSV: "vertex_index,value"

inline Observation parse_labels_csv(std::string_view text) {
    detail::LineReader reader(text);
    std::string_view line;
    if (!reader.next(line) || detail::trim(line) != "vertex_index,value")
        throw ParseError("labels file must start with the header 'vertex_index,value'", 1);
    std::vector<std::size_t> vertices;
    std::vector<double> values;
    while (reader.next(line)) {
        const std::string_view t = detail::trim(line);
        if (t.empty()) continue;
        const auto fields = detail::split_char(t, ',');
        if (fields.size() != 2) throw ParseError("expected 'vertex_index,value'", reader.number());
        const auto v = detail::parse_int<std::size_t>(detail::trim(fields[0]));
        const auto x = detail::parse_double(detail::trim(fields[1]));
        if (!v) throw ParseError("malformed vertex index", reader.number());
        if (!x || !std::isfinite(*x)) throw ParseError("malformed value", reader.number());
        vertices.push_back(*v);
        values.push_back(*x);
    }
    if (vertices.empty()) throw ParseError("labels file has no rows", reader.number() + 1);
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    return Observation(LabelSet(std::move(vertices)), std::move(y));
}

inline std::string write_labels_csv(const Observation& obs) {
    std::string out = "vertex_index,value\n";
    for (std::size_t k = 0; k < obs.labels.size(); ++k)
        out += std::to_string(obs.labels[k]) + "," + format_double(obs.values(static_cast<Eigen::Index>(k))) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Run configuration

enum class EpsRuleKind { literal_squared, linear_2x, explicit_value };

struct EpsRule {
    EpsRuleKind kind = EpsRuleKind::literal_squared;
    double value = 0.0;  // used by explicit_value

    friend bool operator==(const EpsRule&, const EpsRule&) = default;
};

enum class NoiseModel { uniform_centered, degree_proportional, inverse_degree_proportional };

enum class Method { global_opt, grid_search, harmonic, local_opt };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::global_opt: return "global_opt";
        case Method::grid_search: return "grid_search";
        case Method::harmonic: return "harmonic";
        case Method::local_opt: return "local_opt";
    }
    return "?";
}

inline std::string to_string(NoiseModel m) {
    switch (m) {
        case NoiseModel::uniform_centered: return "uniform_centered";
        case NoiseModel::degree_proportional: return "degree_proportional";
        case NoiseModel::inverse_degree_proportional: return "inverse_degree_proportional";
    }
    return "?";
}

inline std::optional<Method> method_from_string(std::string_view s) {
    for (Method m : {Method::global_opt, Method::grid_search, Method::harmonic, Method::local_opt})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

inline std::optional<NoiseModel> noise_model_from_string(std::string_view s) {
    for (NoiseModel m :
         {NoiseModel::uniform_centered, NoiseModel::degree_proportional, NoiseModel::inverse_degree_proportional})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

struct RunConfig {
    std::string dataset_path;
    double eta = 2.0;
    EpsRule eps_rule;
    NoiseModel noise_model = NoiseModel::uniform_centered;
    std::uint64_t seed = 0;
    std::vector<std::size_t> n_labeled_grid;
    std::vector<Method> methods{Method::global_opt, Method::grid_search, Method::harmonic, Method::local_opt};
    std::size_t tau_grid_size = 200;
    double overestimation_factor = 1.0;
    std::size_t trials = 10;
    bool record_runtime = false;

    /// Checks everything that does not need the graph.
    void validate() const {
        if (dataset_path.empty()) throw InvalidArgument("dataset_path must not be empty");
        if (!(std::isfinite(eta) && eta > 0.0)) throw InvalidArgument("eta must be positive");
        if (eps_rule.kind == EpsRuleKind::explicit_value && !(std::isfinite(eps_rule.value) && eps_rule.value > 0.0))
            throw InvalidArgument("explicit eps must be positive");
        if (n_labeled_grid.empty()) throw InvalidArgument("n_labeled_grid must not be empty");
        for (std::size_t k = 0; k < n_labeled_grid.size(); ++k) {
            if (n_labeled_grid[k] == 0) throw InvalidArgument("n_labeled_grid values must be positive");
            if (k > 0 && n_labeled_grid[k] <= n_labeled_grid[k - 1])
                throw InvalidArgument("n_labeled_grid must be strictly increasing");
        }
        if (methods.empty()) throw InvalidArgument("methods must not be empty");
        if (tau_grid_size == 0) throw InvalidArgument("tau_grid_size must be positive");
        if (!(std::isfinite(overestimation_factor) && overestimation_factor >= 1.0))
            throw InvalidArgument("overestimation_factor must be at least 1");
        if (trials == 0) throw InvalidArgument("trials must be positive");
    }

    void validate_for(std::size_t num_vertices) const {
        validate();
        if (n_labeled_grid.back() > num_vertices)
            throw InvalidArgument("n_labeled_grid value " + std::to_string(n_labeled_grid.back()) +
                                  " exceeds the vertex count " + std::to_string(num_vertices));
    }
};

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidArgument("config key '" + key + "' has the wrong type");
    }
}

inline double json_number(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number()) throw InvalidArgument("config key '" + key + "' must be a number");
    return j.get<double>();
}

inline std::uint64_t json_unsigned(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number_unsigned()) throw InvalidArgument("config key '" + key + "' must be a nonnegative integer");
    return j.get<std::uint64_t>();
}

}  // namespace detail

inline RunConfig read_config(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InvalidArgument("config must be a JSON object");

    RunConfig cfg;
    bool has_path = false, has_eta = false, has_seed = false, has_grid = false;
    for (const auto& [key, value] : j.items()) {
        if (key == "dataset_path") {
            if (!value.is_string()) throw InvalidArgument("config key 'dataset_path' must be a string");
            cfg.dataset_path = value.get<std::string>();
            has_path = true;
        } else if (key == "eta") {
            cfg.eta = detail::json_number(value, key);
            has_eta = true;
        } else if (key == "seed") {
            cfg.seed = detail::json_unsigned(value, key);
            has_seed = true;
        } else if (key == "n_labeled_grid") {
            if (!value.is_array()) throw InvalidArgument("config key 'n_labeled_grid' must be an array");
            cfg.n_labeled_grid.clear();
            for (const auto& v : value) cfg.n_labeled_grid.push_back(detail::json_unsigned(v, key));
            has_grid = true;
        } else if (key == "eps_rule") {
            if (value.is_string()) {
                const auto s = value.get<std::string>();
                if (s == "literal_squared") cfg.eps_rule = {EpsRuleKind::literal_squared, 0.0};
                else if (s == "linear_2x") cfg.eps_rule = {EpsRuleKind::linear_2x, 0.0};
                else throw InvalidArgument("config key 'eps_rule' has unknown value '" + s + "'");
            } else if (value.is_object() && value.size() == 1 && value.contains("explicit")) {
                cfg.eps_rule = {EpsRuleKind::explicit_value, detail::json_number(value["explicit"], key)};
            } else {
                throw InvalidArgument(
                    "config key 'eps_rule' must be \"literal_squared\", \"linear_2x\" or {\"explicit\": value}");
            }
        } else if (key == "noise_model") {
            if (!value.is_string()) throw InvalidArgument("config key 'noise_model' must be a string");
            const auto m = noise_model_from_string(value.get<std::string>());
            if (!m) throw InvalidArgument("config key 'noise_model' has unknown value '" + value.get<std::string>() + "'");
            cfg.noise_model = *m;
        } else if (key == "methods") {
            if (!value.is_array()) throw InvalidArgument("config key 'methods' must be an array");
            cfg.methods.clear();
            for (const auto& v : value) {
                const auto name = detail::json_get<std::string>(v, key);
                const auto m = method_from_string(name);
                if (!m) throw InvalidArgument("config key 'methods' has unknown method '" + name + "'");
                if (std::find(cfg.methods.begin(), cfg.methods.end(), *m) != cfg.methods.end())
                    throw InvalidArgument("config key 'methods' lists '" + name + "' twice");
                cfg.methods.push_back(*m);
            }
            std::sort(cfg.methods.begin(), cfg.methods.end());
        } else if (key == "tau_grid_size") {
            cfg.tau_grid_size = detail::json_unsigned(value, key);
        } else if (key == "overestimation_factor") {
            cfg.overestimation_factor = detail::json_number(value, key);
        } else if (key == "trials") {
            cfg.trials = detail::json_unsigned(value, key);
        } else if (key == "record_runtime") {
            if (!value.is_boolean()) throw InvalidArgument("config key 'record_runtime' must be a boolean");
            cfg.record_runtime = value.get<bool>();
        } else {
            throw InvalidArgument("unknown config key '" + key + "'");
        }
    }
    if (!has_path) throw InvalidArgument("config is missing required key 'dataset_path'");
    if (!has_eta) throw InvalidArgument("config is missing required key 'eta'");
    if (!has_seed) throw InvalidArgument("config is missing required key 'seed'");
    if (!has_grid) throw InvalidArgument("config is missing required key 'n_labeled_grid'");
    cfg.validate();
    return cfg;
}

/// Reads a config file; a relative dataset_path is resolved against the
/// directory holding the config.
inline RunConfig load_config(const std::filesystem::path& path) {
    RunConfig cfg = read_config(read_file(path));
    const std::filesystem::path data(cfg.dataset_path);
    if (data.is_relative()) cfg.dataset_path = (path.parent_path() / data).lexically_normal().string();
    return cfg;
}

// ---------------------------------------------------------------------------
// Result table

struct ResultRow {
    std::size_t n_labeled = 0;
    std::string method;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double tau = 0.0;
    double prediction_error = 0.0;
    double certified_bound = std::numeric_limits<double>::quiet_NaN();
    double runtime_ms = 0.0;
};

inline constexpr std::string_view kResultsHeader =
    "n_labeled,method,trial,seed,tau,prediction_error,certified_bound,runtime_ms";

/// Bitwise equality on the floating fields, so nan == nan.
inline bool same_row(const ResultRow& a, const ResultRow& b) {
    auto bits = [](double x) {
        std::uint64_t u;
        std::memcpy(&u, &x, sizeof u);
        return u;
    };
    return a.n_labeled == b.n_labeled && a.method == b.method && a.trial == b.trial && a.seed == b.seed &&
           bits(a.tau) == bits(b.tau) && bits(a.prediction_error) == bits(b.prediction_error) &&
           bits(a.certified_bound) == bits(b.certified_bound) && bits(a.runtime_ms) == bits(b.runtime_ms);
}

inline void sort_rows(std::vector<ResultRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.n_labeled, a.method, a.trial) < std::tie(b.n_labeled, b.method, b.trial);
    });
}

/// Rows are written in (n_labeled, method, trial) order.
inline std::string write_results_csv(std::vector<ResultRow> rows) {
    sort_rows(rows);
    std::string out(kResultsHeader);
    out += '\n';
    for (const ResultRow& r : rows) {
        if (r.method.find_first_of(",\n\r") != std::string::npos)
            throw InvalidArgument("method name must not contain separators");
        out += std::to_string(r.n_labeled) + "," + r.method + "," + std::to_string(r.trial) + "," +
               std::to_string(r.seed) + "," + format_double(r.tau) + "," + format_double(r.prediction_error) + "," +
               format_double(r.certified_bound) + "," + format_double(r.runtime_ms) + "\n";
    }
    return out;
}

inline std::vector<ResultRow> parse_results_csv(std::string_view text) {
    detail::LineReader reader(text);
    std::string_view line;
    if (!reader.next(line) || detail::trim(line) != kResultsHeader)
        throw ParseError("results file must start with the header '" + std::string(kResultsHeader) + "'", 1);
    std::vector<ResultRow> rows;
    while (reader.next(line)) {
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_char(line, ',');
        if (f.size() != 8) throw ParseError("expected 8 fields", reader.number());
        ResultRow r;
        const auto nl = detail::parse_int<std::size_t>(f[0]);
        const auto trial = detail::parse_int<std::size_t>(f[2]);
        const auto seed = detail::parse_int<std::uint64_t>(f[3]);
        const auto tau = detail::parse_double(f[4]);
        const auto err = detail::parse_double(f[5]);
        const auto bound = detail::parse_double(f[6]);
        const auto rt = detail::parse_double(f[7]);
        if (!nl || !trial || !seed || !tau || !err || !bound || !rt || f[1].empty())
            throw ParseError("malformed field", reader.number());
        r.n_labeled = *nl;
        r.method = std::string(f[1]);
        r.trial = *trial;
        r.seed = *seed;
        r.tau = *tau;
        r.prediction_error = *err;
        r.certified_bound = *bound;
        r.runtime_ms = *rt;
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// lwce curve

inline std::string write_curve_csv(const std::vector<LwceCurvePoint>& points) {
    std::string out = "tau,gamma,c,d\n";
    for (const LwceCurvePoint& p : points)
        out += format_double(p.tau) + "," + format_double(p.gamma) + "," + format_double(p.c) + "," +
               format_double(p.d) + "\n";
    return out;
}

}  // namespace gsor
