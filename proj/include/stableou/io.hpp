#pragma once

// File formats: path CSV + covariate sidecar + JSON manifest, covariate spec
// files, Monte Carlo configs and report files. Doubles are written with 17
// significant digits so that reading them back is bit-exact.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stableou/errors.hpp"
#include "stableou/estimators.hpp"
#include "stableou/model.hpp"
#include "stableou/montecarlo.hpp"
#include "stableou/serialization.hpp"

namespace stableou::io {

namespace fs = std::filesystem;

inline bool is_count(const Json& j) {
    return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// JSON with 17-digit doubles

namespace detail {

inline void write_json(std::ostream& os, const Json& j, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            if (std::isfinite(v)) os << format_double(v);
            else os << "null";
            return;
        }
        case Json::value_t::object: {
            if (j.empty()) {
                os << "{}";
                return;
            }
            os << "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) os << ",\n";
                first = false;
                os << pad << Json(it.key()).dump() << ": ";
                write_json(os, it.value(), indent, depth + 1);
            }
            os << "\n" << close << "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                os << "[]";
                return;
            }
            const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
            os << (flat ? "[" : "[\n");
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) os << (flat ? ", " : ",\n");
                if (!flat) os << pad;
                write_json(os, j[i], indent, depth + 1);
            }
            if (!flat) os << "\n" << close;
            os << "]";
            return;
        }
        default:
            os << j.dump();
    }
}

}  // namespace detail

inline std::string dump_json(const Json& j, int indent = 2) {
    std::ostringstream os;
    detail::write_json(os, j, indent, 0);
    os << "\n";
    return os.str();
}

inline void write_text(const fs::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw ValidationError("out", "cannot open " + file.string() + " for writing");
    os << text;
    if (!os) throw ValidationError("out", "write failed for " + file.string());
}

inline std::string read_text(const fs::path& file, const std::string& field) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw ValidationError(field, "cannot open " + file.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline Json read_json(const fs::path& file, const std::string& field) {
    try {
        return Json::parse(read_text(file, field));
    } catch (const Json::parse_error& e) {
        throw ValidationError(field, std::string("invalid JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
    std::vector<std::string> header;
    Matrix rows;
};

inline CsvTable read_csv(const fs::path& file, const std::string& field) {
    std::istringstream is(read_text(file, field));
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::istringstream ls(s);
        while (std::getline(ls, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
            out.push_back(cell);
        }
        return out;
    };
    if (!std::getline(is, line)) throw ValidationError(field, file.string() + " is empty");
    t.header = split(line);
    std::vector<double> values;
    std::size_t nrows = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw ValidationError(field, file.string() + ": row " + std::to_string(nrows + 1) + " has wrong column count");
        for (const std::string& c : cells) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc() || p != c.data() + c.size() || !std::isfinite(v))
                throw ValidationError(field, file.string() + ": bad number '" + c + "'");
            values.push_back(v);
        }
        ++nrows;
    }
    t.rows = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(t.header.size()));
    return t;
}

inline std::string csv_text(const std::vector<std::string>& header, const Matrix& rows) {
    std::string s;
    for (std::size_t k = 0; k < header.size(); ++k) s += (k ? "," : "") + header[k];
    s += "\n";
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index k = 0; k < rows.cols(); ++k) s += (k ? "," : "") + format_double(rows(i, k));
        s += "\n";
    }
    return s;
}

inline std::vector<std::string> covariate_header(std::size_t q) {
    std::vector<std::string> h{"t"};
    for (std::size_t k = 1; k <= q; ++k) h.push_back("x" + std::to_string(k));
    return h;
}

// ---------------------------------------------------------------------------
// Covariate spec files

/// {"type": "constant", "q": 1} | {"type": "harmonic"} |
/// {"type": "tabulated", "file": "x.csv", "interpolation": "linear" | "step"}.
/// Relative file names resolve against `base_dir`.
inline CovariateSpec covariate_from_json(const Json& j, double T, const fs::path& base_dir, std::string& name) {
    if (j.is_string()) return covariate_from_json(Json{{"type", j}}, T, base_dir, name);
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
        throw ValidationError("covariate.type", "must be constant, harmonic or tabulated");
    const std::string type = j.at("type").get<std::string>();
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "type" && it.key() != "q" && it.key() != "file" && it.key() != "interpolation")
            throw ValidationError("covariate." + it.key(), "unknown field");
    name = type;
    if (type == "constant") {
        std::size_t q = 1;
        if (j.contains("q")) {
            if (!is_count(j.at("q")) || j.at("q").get<std::size_t>() < 1)
                throw ValidationError("covariate.q", "must be a positive integer");
            q = j.at("q").get<std::size_t>();
        }
        return CovariateSpec::constant(q);
    }
    if (type == "harmonic") return CovariateSpec::harmonic(T);
    if (type == "tabulated") {
        if (!j.contains("file") || !j.at("file").is_string()) throw ValidationError("covariate.file", "missing");
        Interpolation interp = Interpolation::linear;
        if (j.contains("interpolation")) {
            const Json& ij = j.at("interpolation");
            if (ij == "linear") interp = Interpolation::linear;
            else if (ij == "step") interp = Interpolation::step;
            else throw ValidationError("covariate.interpolation", "must be linear or step");
        }
        const fs::path file = base_dir / j.at("file").get<std::string>();
        const CsvTable t = read_csv(file, "covariate.file");
        if (t.header.size() < 2 || t.header[0] != "t")
            throw ValidationError("covariate.file", "header must be t,x1..xq");
        name = "tabulated:" + j.at("file").get<std::string>();
        return CovariateSpec::tabulated(t.rows.col(0), t.rows.rightCols(t.rows.cols() - 1), interp);
    }
    throw ValidationError("covariate.type", "must be constant, harmonic or tabulated");
}

inline CovariateSpec read_covariate(const fs::path& file, double T, std::string* name = nullptr) {
    std::string n;
    CovariateSpec c = covariate_from_json(read_json(file, "covariate"), T, file.parent_path(), n);
    if (name) *name = n;
    return c;
}

// ---------------------------------------------------------------------------
// Parameter files

struct ParamsFile {
    ModelParams theta;
    double y0 = 0.0;
    ParamBox box;
};

/// {lambda, mu[], beta, sigma, y0?, box?}
inline ParamsFile params_file_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("params", "must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        static const std::vector<std::string> known{"lambda", "mu", "beta", "sigma", "y0", "box"};
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ValidationError(it.key(), "unknown field");
    }
    ParamsFile p{params_from_json(j), 0.0, {}};
    if (j.contains("y0")) p.y0 = stableou::detail::number_field(j, "y0", "");
    if (j.contains("box")) p.box = box_from_json(j.at("box"));
    if (!p.box.contains(p.theta)) throw ValidationError("params", "outside the parameter box");
    return p;
}

// ---------------------------------------------------------------------------
// Path files

struct PathFiles {
    fs::path path_csv, covariate_csv, manifest;
};

/// `out` names the manifest (`stem.json`); the CSVs are `stem.csv` and `stem.covariate.csv`.
inline PathFiles path_files(const fs::path& out) {
    fs::path stem = out;
    stem.replace_extension();
    const fs::path dir = out.parent_path();
    const std::string base = stem.filename().string();
    return {dir / (base + ".csv"), dir / (base + ".covariate.csv"), dir / (base + ".json")};
}

/// How simulate writes the covariate sidecar.
enum class SidecarForm {
    integrals,   // row j: (t_j, integral of X over (t_{j-1}, t_j])
    trajectory,  // X on a grid of `subgrid` points per interval, linear interpolation
};

/// Writes the path CSV, the covariate sidecar and the manifest; returns the file names.
inline PathFiles write_path(const ObservedPath& path, const fs::path& out, SidecarForm form, int subgrid = 10) {
    const PathFiles f = path_files(out);
    const std::size_t n = path.n();
    const double h = path.h();
    Matrix py(static_cast<Eigen::Index>(n + 1), 2);
    for (std::size_t j = 0; j <= n; ++j) {
        py(static_cast<Eigen::Index>(j), 0) = j == n ? path.T() : static_cast<double>(j) * h;
        py(static_cast<Eigen::Index>(j), 1) = path.y()(static_cast<Eigen::Index>(j));
    }
    Matrix cov;
    std::string interp = "integrals";
    const auto q = static_cast<Eigen::Index>(path.q());
    if (form == SidecarForm::integrals || !path.covariate()) {
        cov.resize(static_cast<Eigen::Index>(n), q + 1);
        cov.col(0) = py.col(0).tail(static_cast<Eigen::Index>(n));
        cov.rightCols(q) = path.x_int();
    } else {
        const CovariateSpec& c = *path.covariate();
        if (c.kind() == CovariateSpec::Kind::tabulated) {
            cov.resize(c.times().size(), q + 1);
            cov.col(0) = c.times();
            cov.rightCols(q) = c.values();
            interp = c.interpolation() == Interpolation::step ? "step" : "linear";
        } else {
            const std::size_t m = n * static_cast<std::size_t>(subgrid);
            cov.resize(static_cast<Eigen::Index>(m + 1), q + 1);
            for (std::size_t i = 0; i <= m; ++i) {
                const double t = i == m ? path.T() : path.T() * static_cast<double>(i) / static_cast<double>(m);
                cov(static_cast<Eigen::Index>(i), 0) = t;
                cov.row(static_cast<Eigen::Index>(i)).tail(q) = c.value(t).transpose();
            }
            interp = "linear";
        }
    }
    write_text(f.path_csv, csv_text({"t", "y"}, py));
    write_text(f.covariate_csv, csv_text(covariate_header(path.q()), cov));
    const Json manifest = {{"T", path.T()},
                           {"n", n},
                           {"q", path.q()},
                           {"interpolation", interp},
                           {"path_file", f.path_csv.filename().string()},
                           {"covariate_file", f.covariate_csv.filename().string()}};
    write_text(f.manifest, dump_json(manifest));
    return f;
}

/// Loads a path from its manifest.
inline ObservedPath read_path(const fs::path& manifest_file) {
    const Json m = read_json(manifest_file, "path");
    if (!m.is_object()) throw ValidationError("path", "manifest must be an object");
    const double T = stableou::detail::number_field(m, "T", "");
    for (const char* key : {"n", "q"})
        if (!m.contains(key) || !is_count(m.at(key))) throw ValidationError(key, "must be a non-negative integer");
    const auto n = m.at("n").get<std::size_t>();
    const auto q = m.at("q").get<std::size_t>();
    for (const char* key : {"interpolation", "path_file", "covariate_file"})
        if (!m.contains(key) || !m.at(key).is_string()) throw ValidationError(key, "missing");
    const std::string interp = m.at("interpolation").get<std::string>();
    const fs::path dir = manifest_file.parent_path();

    const fs::path pfile = dir / m.at("path_file").get<std::string>();
    const CsvTable p = read_csv(pfile, "path_file");
    if (p.header != std::vector<std::string>{"t", "y"}) throw ValidationError("path_file", "header must be t,y");
    if (static_cast<std::size_t>(p.rows.rows()) != n + 1) throw ValidationError("n", "path file must have n + 1 rows");
    const double h = T / static_cast<double>(n);
    for (Eigen::Index j = 0; j < p.rows.rows(); ++j)
        if (std::abs(p.rows(j, 0) - static_cast<double>(j) * h) > 1e-9 * T)
            throw ValidationError("path_file", "times must form the regular grid jT/n");
    Vector y = p.rows.col(1);

    const fs::path cfile = dir / m.at("covariate_file").get<std::string>();
    if (!fs::exists(cfile)) throw ValidationError("covariate_file", "missing file " + cfile.string());
    const CsvTable c = read_csv(cfile, "covariate_file");
    if (c.header != covariate_header(q)) throw ValidationError("covariate_file", "header must be t,x1..xq with q columns");
    const Matrix x = c.rows.rightCols(static_cast<Eigen::Index>(q));
    if (interp == "integrals") {
        if (static_cast<std::size_t>(c.rows.rows()) != n) throw ValidationError("covariate_file", "need n rows of interval integrals");
        return ObservedPath::with_integrals(T, std::move(y), x);
    }
    Interpolation mode;
    if (interp == "linear") mode = Interpolation::linear;
    else if (interp == "step") mode = Interpolation::step;
    else throw ValidationError("interpolation", "must be linear, step or integrals");
    return ObservedPath::with_covariate(T, std::move(y), CovariateSpec::tabulated(c.rows.col(0), x, mode));
}

// ---------------------------------------------------------------------------
// Monte Carlo config and report files

inline Pipeline parse_pipeline(const std::string& s, const std::string& field = "pipeline") {
    if (s == "prelim" || s == "preliminary") return Pipeline::preliminary;
    if (s == "one-step" || s == "one_step") return Pipeline::one_step;
    if (s == "refined") return Pipeline::refined;
    throw ValidationError(field, "must be prelim, one-step or refined");
}

inline StepInformation parse_information(const std::string& s, const std::string& field = "information") {
    if (s == "fisher") return StepInformation::fisher;
    if (s == "observed") return StepInformation::observed;
    throw ValidationError(field, "must be fisher or observed");
}

/// JSON config; relative paths (tabulated covariates, outputs) resolve against `base_dir`.
inline McConfig mc_config_from_json(const Json& j, const fs::path& base_dir = {}) {
    if (!j.is_object()) throw ValidationError("config", "must be an object");
    static const std::vector<std::string> known{"theta", "covariate", "n_grid", "T", "y0", "replications", "seed",
                                                "pipeline", "information", "fix_r", "refine_steps", "box", "outputs"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) throw ValidationError(it.key(), "unknown field");
    McConfig c;
    if (!j.contains("theta")) throw ValidationError("theta", "missing");
    c.theta_true = params_from_json(j.at("theta"), "theta.");
    if (j.contains("T")) c.T = stableou::detail::number_field(j, "T", "");
    if (!(c.T > 0.0)) throw ValidationError("T", "must be positive");
    if (j.contains("y0")) c.y0 = stableou::detail::number_field(j, "y0", "");
    c.covariate = j.contains("covariate") ? covariate_from_json(j.at("covariate"), c.T, base_dir, c.covariate_name)
                                          : CovariateSpec::harmonic(c.T);
    if (j.contains("n_grid")) {
        const Json& g = j.at("n_grid");
        if (!g.is_array() || g.empty()) throw ValidationError("n_grid", "must be a non-empty array");
        c.n_grid.clear();
        for (const Json& e : g) {
            if (!is_count(e)) throw ValidationError("n_grid", "entries must be positive integers");
            c.n_grid.push_back(e.get<std::size_t>());
        }
    }
    auto uint_field = [&](const char* key, auto& target) {
        if (!j.contains(key)) return;
        if (!is_count(j.at(key))) throw ValidationError(key, "must be a non-negative integer");
        target = j.at(key).get<std::remove_reference_t<decltype(target)>>();
    };
    uint_field("replications", c.replications);
    uint_field("seed", c.seed);
    std::size_t refine = static_cast<std::size_t>(c.estimation.refine_steps);
    uint_field("refine_steps", refine);
    c.estimation.refine_steps = static_cast<int>(refine);
    if (j.contains("pipeline")) {
        if (!j.at("pipeline").is_string()) throw ValidationError("pipeline", "must be a string");
        c.estimation.pipeline = parse_pipeline(j.at("pipeline").get<std::string>());
    }
    if (j.contains("information")) {
        if (!j.at("information").is_string()) throw ValidationError("information", "must be a string");
        c.estimation.information = parse_information(j.at("information").get<std::string>());
    }
    if (j.contains("fix_r") && !j.at("fix_r").is_null()) {
        const double r = stableou::detail::number_field(j, "fix_r", "");
        if (!(r > 0.0 && r < 2.0)) throw ValidationError("fix_r", "must lie in (0, 2)");
        c.estimation.preliminary.fix_r = r;
    }
    if (j.contains("box")) c.estimation.preliminary.box = box_from_json(j.at("box"));
    if (j.contains("outputs")) {
        if (!j.at("outputs").is_string()) throw ValidationError("outputs", "must be a directory path");
        const fs::path out = j.at("outputs").get<std::string>();
        c.outputs = (out.is_absolute() ? out : base_dir / out).string();
    }
    c.validate();
    return c;
}

inline McConfig read_mc_config(const fs::path& file) {
    return mc_config_from_json(read_json(file, "config"), file.parent_path());
}

/// Writes report.json, one CSV per metric, per-replication CSVs, a gnuplot
/// rate table and timing.json into `dir`.
inline void write_report(const McReport& rep, const McConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    write_text(dir / "report.json", dump_json(report_json(rep, cfg)));

    const auto names = component_names(cfg.theta_true.q());
    const std::size_t p = names.size();
    std::vector<std::string> header{"n", "stage"};
    header.insert(header.end(), names.begin(), names.end());
    auto metric_csv = [&](const std::string& metric, auto getter) {
        std::string s;
        for (std::size_t k = 0; k < header.size(); ++k) s += (k ? "," : "") + header[k];
        s += "\n";
        for (const GridPointReport& gp : rep.grid) {
            for (const auto& [stage, stats] : {std::pair{"theta0", &gp.theta0}, std::pair{"final", &gp.final}}) {
                if (stats->empty()) continue;
                s += std::to_string(gp.n) + "," + stage;
                for (const ComponentStats& c : *stats) {
                    const std::optional<double> v = getter(c);
                    s += "," + (v ? format_double(*v) : std::string("NA"));
                }
                s += "\n";
            }
        }
        write_text(dir / (metric + ".csv"), s);
    };
    metric_csv("bias", [](const ComponentStats& c) { return std::optional<double>(c.bias); });
    metric_csv("rmse", [](const ComponentStats& c) { return std::optional<double>(c.rmse); });
    metric_csv("rate_rmse", [](const ComponentStats& c) { return std::optional<double>(c.rate_rmse); });
    metric_csv("rate_sd", [](const ComponentStats& c) { return std::optional<double>(c.rate_sd); });
    metric_csv("ks", [](const ComponentStats& c) { return c.ks; });
    metric_csv("coverage", [](const ComponentStats& c) { return c.coverage; });

    for (const GridPointReport& gp : rep.grid) {
        std::string s = "replication,seed,status,stage";
        for (const char* prefix : {"theta0_", "final_", "se_"})
            for (const auto& nm : names) s += std::string(",") + prefix + nm;
        s += ",flags\n";
        for (const ReplicationRecord& r : gp.records) {
            s += std::to_string(r.index) + "," + std::to_string(r.seed) + ",";
            s += r.failure ? std::string("\"") + to_string(*r.failure) + "\"," + r.failure_stage : "ok,";
            for (const Vector* v : {&r.theta0, &r.theta_final, &r.stderr_})
                for (std::size_t k = 0; k < p; ++k)
                    s += "," + (static_cast<std::size_t>(v->size()) == p ? format_double((*v)(static_cast<Eigen::Index>(k)))
                                                                          : std::string("NA"));
            std::string flags;
            for (const std::string& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
            s += "," + flags + "\n";
        }
        write_text(dir / ("replications_n" + std::to_string(gp.n) + ".csv"), s);
    }

    std::string dat = "# n";
    for (const auto& nm : names) dat += " rmse_" + nm;
    dat += "\n";
    for (const GridPointReport& gp : rep.grid) {
        const auto& stats = gp.final.empty() ? gp.theta0 : gp.final;
        dat += std::to_string(gp.n);
        for (const ComponentStats& c : stats) dat += " " + format_double(c.rmse);
        dat += "\n";
    }
    write_text(dir / "rates.dat", dat);
    write_text(dir / "timing.json", dump_json(Json{{"wall_clock_seconds", rep.wall_clock_seconds}}));
}

}  // namespace stableou::io
