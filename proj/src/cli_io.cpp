#include "maskcov/cli_io.hpp"

#include "maskcov/estimator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace maskcov {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---- config schema -------------------------------------------------------

std::string join_key(std::string_view where, std::string_view key) {
    return where.empty() ? std::string(key) : std::string(where) + "." + std::string(key);
}

class SchemaReader {
public:
    explicit SchemaReader(std::vector<std::string>& errors) : errors_(errors) {}

    void error(std::string message) { errors_.push_back(std::move(message)); }

    bool object(const json& j, std::string_view where) {
        if (j.is_object()) return true;
        error(std::string(where.empty() ? "config" : where) + ": expected an object");
        return false;
    }

    void allow_only(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
        for (const auto& [key, value] : j.items()) {
            if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
                error("unknown key '" + key + "' in " + std::string(where.empty() ? "config" : where));
            }
        }
    }

    std::optional<double> number(const json& j, std::string_view key, std::string_view where, bool required) {
        const auto it = j.find(key);
        if (it == j.end()) {
            if (required) error(join_key(where, key) + ": required");
            return std::nullopt;
        }
        if (!it->is_number()) {
            error(join_key(where, key) + ": expected a number");
            return std::nullopt;
        }
        return it->get<double>();
    }

    std::optional<std::uint64_t> integer(const json& j, std::string_view key, std::string_view where,
                                         bool required, std::uint64_t minimum) {
        const auto it = j.find(key);
        if (it == j.end()) {
            if (required) error(join_key(where, key) + ": required");
            return std::nullopt;
        }
        std::optional<std::uint64_t> value;
        if (it->is_number_unsigned()) {
            value = it->get<std::uint64_t>();
        } else if (it->is_number_integer()) {
            if (it->get<std::int64_t>() >= 0) value = static_cast<std::uint64_t>(it->get<std::int64_t>());
        } else if (it->is_number_float()) {
            const double d = it->get<double>();
            if (d >= 0.0 && d == std::floor(d) && d < 9.0e15) value = static_cast<std::uint64_t>(d);
        }
        if (!value) {
            error(join_key(where, key) + ": expected a nonnegative integer");
            return std::nullopt;
        }
        if (*value < minimum) {
            error(join_key(where, key) + ": must be >= " + std::to_string(minimum));
            return std::nullopt;
        }
        return value;
    }

    std::optional<std::string> text(const json& j, std::string_view key, std::string_view where, bool required) {
        const auto it = j.find(key);
        if (it == j.end()) {
            if (required) error(join_key(where, key) + ": required");
            return std::nullopt;
        }
        if (!it->is_string()) {
            error(join_key(where, key) + ": expected a string");
            return std::nullopt;
        }
        return it->get<std::string>();
    }

    std::optional<bool> boolean(const json& j, std::string_view key, std::string_view where) {
        const auto it = j.find(key);
        if (it == j.end()) return std::nullopt;
        if (!it->is_boolean()) {
            error(join_key(where, key) + ": expected true or false");
            return std::nullopt;
        }
        return it->get<bool>();
    }

private:
    std::vector<std::string>& errors_;
};

fs::path resolve_path(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

std::optional<CovarianceSpec> read_covariance(const json& j, SchemaReader& r, const fs::path& base) {
    constexpr std::string_view where = "model.covariance";
    if (!r.object(j, where)) return std::nullopt;
    const auto kind = r.text(j, "kind", where, true);
    if (!kind) return std::nullopt;

    if (*kind == "identity") {
        r.allow_only(j, where, {"kind", "p", "scale"});
    } else if (*kind == "ar1") {
        r.allow_only(j, where, {"kind", "p", "rho"});
    } else if (*kind == "decaying") {
        r.allow_only(j, where, {"kind", "p", "alpha"});
    } else if (*kind == "rank_one_plus") {
        r.allow_only(j, where, {"kind", "p", "lambda", "delta"});
    } else if (*kind == "custom") {
        r.allow_only(j, where, {"kind", "p", "path"});
    } else {
        r.error(std::string(where) + ".kind: unknown covariance kind '" + *kind +
                "' (expected identity, ar1, decaying, rank_one_plus or custom)");
        return std::nullopt;
    }

    const auto p = r.integer(j, "p", where, *kind != "custom", 1);
    try {
        if (*kind == "identity") {
            const double scale = r.number(j, "scale", where, false).value_or(1.0);
            if (p) return CovarianceSpec::identity(*p, scale);
        } else if (*kind == "ar1") {
            const auto rho = r.number(j, "rho", where, true);
            if (p && rho) return CovarianceSpec::ar1(*p, *rho);
        } else if (*kind == "decaying") {
            const auto alpha = r.number(j, "alpha", where, true);
            if (p && alpha) return CovarianceSpec::decaying(*p, *alpha);
        } else if (*kind == "rank_one_plus") {
            const auto lambda = r.number(j, "lambda", where, true);
            const auto delta = r.number(j, "delta", where, true);
            if (p && lambda && delta) return CovarianceSpec::rank_one_plus(*p, *lambda, *delta);
        } else {
            const auto path = r.text(j, "path", where, true);
            if (!path) return std::nullopt;
            SymMatrix sigma = read_matrix_file(resolve_path(base, *path).string());
            if (p && *p != sigma.dim()) {
                r.error(std::string(where) + ".p: " + std::to_string(*p) + " does not match the " +
                        std::to_string(sigma.dim()) + "x" + std::to_string(sigma.dim()) + " matrix in " + *path);
                return std::nullopt;
            }
            return CovarianceSpec::custom(std::move(sigma));
        }
    } catch (const std::exception& e) {
        r.error(std::string(where) + ": " + e.what());
    }
    return std::nullopt;
}

std::optional<DistributionSpec> read_model(const json& j, SchemaReader& r, const fs::path& base) {
    constexpr std::string_view where = "model";
    if (!r.object(j, where)) return std::nullopt;
    r.allow_only(j, where, {"covariance", "family", "df"});

    DistributionSpec model;
    bool ok = true;
    if (const auto it = j.find("covariance"); it == j.end()) {
        r.error("model.covariance: required");
        ok = false;
    } else if (auto cov = read_covariance(*it, r, base)) {
        model.covariance = std::move(*cov);
    } else {
        ok = false;
    }

    if (const auto family = r.text(j, "family", where, false)) {
        try {
            model.family = family_from_string(*family);
        } catch (const std::invalid_argument& e) {
            r.error(std::string("model.family: ") + e.what());
            ok = false;
        }
    }
    if (const auto df = r.number(j, "df", where, false)) {
        if (model.family != Family::student_t) {
            r.error("model.df: only meaningful for the student_t family");
            ok = false;
        }
        model.df = *df;
    }
    if (!ok) return std::nullopt;
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        r.error(std::string("model: ") + e.what());
        return std::nullopt;
    }
    return model;
}

std::optional<Mask> read_mask(const json& j, SchemaReader& r, const fs::path& base, std::optional<std::size_t> p) {
    constexpr std::string_view where = "mask";
    if (!r.object(j, where)) return std::nullopt;
    const auto kind = r.text(j, "kind", where, true);
    if (!kind) return std::nullopt;

    MaskKind mk{};
    try {
        mk = mask_kind_from_string(*kind);
    } catch (const std::invalid_argument& e) {
        r.error(std::string("mask.kind: ") + e.what());
        return std::nullopt;
    }

    try {
        switch (mk) {
            case MaskKind::banded:
            case MaskKind::tapered: {
                r.allow_only(j, where, {"kind", "bandwidth"});
                const auto b = r.integer(j, "bandwidth", where, true, 1);
                if (!b || !p) return std::nullopt;
                const int bw = static_cast<int>(std::min<std::uint64_t>(*b, 1u << 30));
                return mk == MaskKind::banded ? banded_mask(*p, bw) : tapered_mask(*p, bw);
            }
            case MaskKind::all_ones:
                r.allow_only(j, where, {"kind"});
                if (!p) return std::nullopt;
                return all_ones_mask(*p);
            case MaskKind::custom: {
                r.allow_only(j, where, {"kind", "path"});
                const auto path = r.text(j, "path", where, true);
                if (!path) return std::nullopt;
                return load_mask(resolve_path(base, *path).string());
            }
        }
    } catch (const std::exception& e) {
        r.error(std::string("mask: ") + e.what());
    }
    return std::nullopt;
}

std::optional<StudySpec> read_study(const json& j, SchemaReader& r) {
    constexpr std::string_view where = "study";
    if (!r.object(j, where)) return std::nullopt;
    r.allow_only(j, where, {"axis", "values"});
    StudySpec study;
    bool ok = true;
    if (const auto axis = r.text(j, "axis", where, true)) {
        try {
            study.axis = axis_from_string(*axis);
        } catch (const std::invalid_argument& e) {
            r.error(std::string("study.axis: ") + e.what());
            ok = false;
        }
    } else {
        ok = false;
    }
    const auto it = j.find("values");
    if (it == j.end() || !it->is_array() || it->empty()) {
        r.error("study.values: expected a non-empty array of positive integers");
        return std::nullopt;
    }
    for (const auto& v : *it) {
        if (!v.is_number() || !(v.get<double>() >= 1.0) || v.get<double>() != std::floor(v.get<double>())) {
            r.error("study.values: expected a non-empty array of positive integers");
            return std::nullopt;
        }
        study.values.push_back(v.get<double>());
    }
    if (!ok) return std::nullopt;
    return study;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace

ParsedConfig parse_config_text(std::string_view text, const fs::path& base_dir) {
    ParsedConfig out;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        out.errors.push_back(std::string("config is not valid JSON: ") + e.what());
        return out;
    }
    out.canonical = doc.dump();
    out.hash = fnv1a64(out.canonical);

    SchemaReader r(out.errors);
    if (!r.object(doc, "")) return out;
    r.allow_only(doc, "", {"model", "mask", "n", "trials", "seed", "centered", "eps", "threads", "study"});

    ExperimentConfig cfg;
    std::optional<DistributionSpec> model;
    if (const auto it = doc.find("model"); it == doc.end()) {
        r.error("model: required");
    } else {
        model = read_model(*it, r, base_dir);
    }
    std::optional<Mask> mask;
    if (const auto it = doc.find("mask"); it == doc.end()) {
        r.error("mask: required");
    } else {
        mask = read_mask(*it, r, base_dir, model ? std::optional(model->covariance.dim()) : std::nullopt);
    }

    const auto n = r.integer(doc, "n", "", true, 1);
    const auto trials = r.integer(doc, "trials", "", false, 2);
    const auto seed = r.integer(doc, "seed", "", false, 0);
    const auto centered = r.boolean(doc, "centered", "");
    const auto eps = r.number(doc, "eps", "", false);
    if (eps && !(*eps > 0.0 && *eps < 1.0)) r.error("eps: ε must lie in (0,1)");
    const auto threads = r.integer(doc, "threads", "", false, 0);
    if (const auto it = doc.find("study"); it != doc.end()) out.study = read_study(*it, r);

    if (!out.errors.empty() || !model || !mask || !n) return out;

    cfg.model = std::move(*model);
    cfg.mask = std::move(*mask);
    cfg.n = static_cast<std::size_t>(*n);
    cfg.trials = static_cast<std::size_t>(trials.value_or(100));
    cfg.seed = seed.value_or(1);
    cfg.centered = centered.value_or(false);
    cfg.eps = eps;
    cfg.threads = static_cast<unsigned>(threads.value_or(0));
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        out.errors.push_back(e.what());
        return out;
    }
    out.config = std::move(cfg);
    return out;
}

ParsedConfig parse_config(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::invalid_argument&) {
        ParsedConfig out;
        out.errors.push_back("cannot open config file " + path);
        return out;
    }
    return parse_config_text(text, fs::path(path).parent_path());
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback) {
    if (flag) return *flag;
    if (const char* env = std::getenv("MASKCOV_SEED"); env && *env) {
        std::uint64_t v = 0;
        const char* end = env + std::char_traits<char>::length(env);
        const auto [ptr, ec] = std::from_chars(env, end, v);
        if (ec != std::errc() || ptr != end) {
            throw std::invalid_argument(std::string("MASKCOV_SEED is not a nonnegative integer: ") + env);
        }
        return v;
    }
    return fallback;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file_atomic(const std::string& path, std::string_view contents) {
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::invalid_argument("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, target);
}

void write_manifest(const RunManifest& m, const std::string& path) {
    json j = {{"command", m.command},   {"config_hash", hex64(m.config_hash)},
              {"tool_version", m.tool_version}, {"started", m.started},
              {"finished", m.finished}, {"outputs", m.outputs}};
    write_file_atomic(path, j.dump(2) + "\n");
}

CsvRow to_csv_row(const ScalingRow& row) {
    const ExperimentResult& r = row.result;
    return {row.axis_value,           r.empirical_rms,         r.std_error,
            r.theoretical.total,      r.theoretical.moderate_term, r.theoretical.large_dev_term,
            r.ratio,                  r.config.trials,         r.config.seed};
}

void write_csv(std::ostream& out, std::span<const ScalingRow> rows) {
    out << kCsvHeader << '\n';
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17e", v);
        out << buf;
    };
    for (const auto& row : rows) {
        const CsvRow c = to_csv_row(row);
        for (double v : {c.axis_value, c.empirical_rms, c.std_error, c.theoretical_total, c.theoretical_moderate,
                         c.theoretical_large_dev, c.ratio}) {
            num(v);
            out << ',';
        }
        out << c.trials << ',' << c.seed << '\n';
    }
}

void emit_csv(std::span<const ScalingRow> rows, const std::string& path) {
    std::ostringstream buf;
    write_csv(buf, rows);
    write_file_atomic(path, buf.str());
}

std::vector<CsvRow> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw std::invalid_argument("read_csv: unexpected header");
    std::vector<CsvRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
            fields.push_back(rest.substr(0, pos));
        }
        fields.push_back(rest);
        if (fields.size() != 9) {
            throw std::invalid_argument("read_csv: line " + std::to_string(line_no) + " has " +
                                        std::to_string(fields.size()) + " fields, expected 9");
        }
        auto parse = [&](std::string_view f, auto& v) {
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size()) {
                throw std::invalid_argument("read_csv: bad field '" + std::string(f) + "' on line " +
                                            std::to_string(line_no));
            }
        };
        CsvRow r;
        double* reals[] = {&r.axis_value, &r.empirical_rms, &r.std_error, &r.theoretical_total,
                           &r.theoretical_moderate, &r.theoretical_large_dev, &r.ratio};
        for (std::size_t i = 0; i < 7; ++i) parse(fields[i], *reals[i]);
        parse(fields[7], r.trials);
        parse(fields[8], r.seed);
        rows.push_back(r);
    }
    return rows;
}

std::vector<CsvRow> read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    return read_csv(in);
}

// ---- command line --------------------------------------------------------

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitViolated = 2;

void diagnostic(std::ostream& err, std::string_view kind, const std::string& message,
                const json& extra = json::object()) {
    json j = {{"status", "error"}, {"kind", kind}, {"message", message}};
    j.update(extra);
    err << j.dump() << '\n';
}

json bound_json(const BoundReport& b) {
    return {{"formula", b.formula},
            {"moderate_term", b.moderate_term},
            {"large_dev_term", b.large_dev_term},
            {"total", b.total},
            {"inputs", b.inputs}};
}

json complexity_json(const SampleComplexity& s, const std::map<std::string, double>& inputs) {
    return {{"formula", s.formula},     {"moderate_term", s.first_term}, {"large_dev_term", s.second_term},
            {"total", s.value},         {"samples", s.samples},          {"inputs", inputs}};
}

void require(const CLI::Option* opt, std::string_view context) {
    if (opt->count() == 0) {
        throw std::invalid_argument(opt->get_name() + " is required for " + std::string(context));
    }
}

void emit_text(std::ostream& out, const std::string& path, const std::string& text) {
    if (path.empty()) {
        out << text;
    } else {
        write_file_atomic(path, text);
    }
}

struct ModelOptions {
    std::string covariance = "identity";
    std::size_t p = 0;
    std::size_t default_p = 0;
    double rho = 0.5;
    double alpha = 2.0;
    double lambda = 0.0;
    double delta = 1.0;
    double scale = 1.0;
    std::string sigma_path;
    std::string family = "gaussian";
    double df = 9.0;

    CLI::Option* p_opt = nullptr;
    CLI::Option* covariance_opt = nullptr;

    void add(CLI::App* app, bool with_family) {
        covariance_opt = app->add_option("--covariance", covariance,
                                         "identity | ar1 | decaying | rank_one_plus")
                             ->capture_default_str();
        p_opt = app->add_option("--p", p, "Dimension");
        app->add_option("--rho", rho, "ar1 correlation")->capture_default_str();
        app->add_option("--alpha", alpha, "decay exponent")->capture_default_str();
        app->add_option("--lambda", lambda, "rank_one_plus spike")->capture_default_str();
        app->add_option("--delta", delta, "rank_one_plus floor")->capture_default_str();
        app->add_option("--scale", scale, "identity scale")->capture_default_str();
        app->add_option("--sigma", sigma_path, "Covariance matrix file (overrides --covariance)");
        if (with_family) {
            app->add_option("--family", family, "gaussian | student_t | sphere_bounded")->capture_default_str();
            app->add_option("--df", df, "student_t degrees of freedom")->capture_default_str();
        }
    }

    bool given() const { return !sigma_path.empty() || covariance_opt->count() > 0; }

    CovarianceSpec spec() const {
        if (!sigma_path.empty()) {
            SymMatrix s = read_matrix_file(sigma_path);
            if (p_opt->count() > 0 && p != s.dim()) throw std::invalid_argument("--p does not match --sigma");
            return CovarianceSpec::custom(std::move(s));
        }
        if (p_opt->count() == 0 && default_p == 0) throw std::invalid_argument("--p is required");
        const std::size_t dim = p_opt->count() > 0 ? p : default_p;
        if (covariance == "identity") return CovarianceSpec::identity(dim, scale);
        if (covariance == "ar1") return CovarianceSpec::ar1(dim, rho);
        if (covariance == "decaying") return CovarianceSpec::decaying(dim, alpha);
        if (covariance == "rank_one_plus") return CovarianceSpec::rank_one_plus(dim, lambda, delta);
        throw std::invalid_argument("unknown covariance kind '" + covariance + "'");
    }

    DistributionSpec distribution() const {
        DistributionSpec d;
        d.covariance = spec();
        d.family = family_from_string(family);
        d.df = df;
        d.validate();
        return d;
    }
};

struct MaskOptions {
    std::string path;
    std::string kind;
    int bandwidth = 0;
    CLI::Option* kind_opt = nullptr;
    CLI::Option* bandwidth_opt = nullptr;

    explicit MaskOptions(std::string default_kind) : kind(std::move(default_kind)) {}

    void add(CLI::App* app) {
        app->add_option("--mask", path, "Mask matrix file");
        kind_opt = app->add_option("--mask-kind", kind, "banded | all_ones | tapered")->capture_default_str();
        bandwidth_opt = app->add_option("--bandwidth", bandwidth, "Odd mask bandwidth B");
    }

    bool given() const { return !path.empty() || kind_opt->count() > 0 || bandwidth_opt->count() > 0; }

    Mask build(std::size_t p) const {
        if (!path.empty()) return load_mask(path);
        switch (mask_kind_from_string(kind)) {
            case MaskKind::banded:
            case MaskKind::tapered:
                if (bandwidth_opt->count() == 0) throw std::invalid_argument("--bandwidth is required for " + kind);
                return kind == "banded" ? banded_mask(p, bandwidth) : tapered_mask(p, bandwidth);
            case MaskKind::all_ones: return all_ones_mask(p);
            case MaskKind::custom: break;
        }
        throw std::invalid_argument("custom masks are read with --mask FILE");
    }
};

std::string joined(int argc, const char* const* argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

int report_check(std::ostream& out, std::ostream& err, std::string_view check, json report, bool holds) {
    report["check"] = check;
    report["holds"] = holds;
    out << report.dump(2) << '\n';
    if (holds) return kExitOk;
    diagnostic(err, "verification_failed", std::string(check) + " inequality violated", {{"check", check}});
    return kExitViolated;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Masked covariance estimation: estimators, bounds and Monte Carlo checks", "maskcov"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    std::optional<std::uint64_t> seed_flag;
    unsigned threads = 0;
    std::size_t trials = 0;
    auto add_run_opts = [&](CLI::App* sub, std::size_t default_trials) {
        sub->add_option("--seed", seed_flag, "Master seed (overrides MASKCOV_SEED)");
        sub->add_option("--threads", threads, "Worker threads, 0 = all cores");
        sub->add_option("--trials", trials, "Monte Carlo trials (default " + std::to_string(default_trials) + ")");
    };

    // mask gen
    auto* mask_cmd = app.add_subcommand("mask", "Mask matrices")->require_subcommand(1);
    auto* mask_gen = mask_cmd->add_subcommand("gen", "Write a built-in mask in dense matrix format");
    std::string mg_kind, mg_out;
    std::size_t mg_p = 0;
    int mg_bandwidth = 1;
    mask_gen->add_option("--kind", mg_kind, "banded | all_ones | tapered")->required();
    mask_gen->add_option("--p", mg_p, "Dimension")->required();
    auto* mg_bw = mask_gen->add_option("--bandwidth", mg_bandwidth, "Odd bandwidth B");
    mask_gen->add_option("--out", mg_out, "Output file (stdout when omitted)");

    // model gen
    auto* model_cmd = app.add_subcommand("model", "Population models")->require_subcommand(1);
    auto* model_gen = model_cmd->add_subcommand("gen", "Draw samples from a model");
    ModelOptions mo_gen;
    mo_gen.add(model_gen, true);
    std::size_t gen_n = 0;
    std::string gen_out, gen_sigma_out;
    model_gen->add_option("--n", gen_n, "Number of samples")->required();
    model_gen->add_option("--seed", seed_flag, "Seed (overrides MASKCOV_SEED)");
    model_gen->add_option("--out", gen_out, "Samples file (stdout when omitted)");
    model_gen->add_option("--sigma-out", gen_sigma_out, "Also write the covariance matrix here");

    // estimate
    auto* estimate = app.add_subcommand("estimate", "Masked sample covariance of a samples file");
    std::string est_mask, est_samples, est_out, est_sigma;
    bool est_centered = false, est_decompose = false;
    estimate->add_option("--mask", est_mask, "Mask matrix file")->required();
    estimate->add_option("--samples", est_samples, "Samples file")->required();
    estimate->add_flag("--centered", est_centered, "Center the samples first");
    estimate->add_option("--out", est_out, "Estimate output file (stdout when omitted)");
    estimate->add_option("--sigma", est_sigma, "True covariance, needed for --decompose");
    estimate->add_flag("--decompose", est_decompose, "Print the bias/variance decomposition as JSON");

    // bound
    auto* bound = app.add_subcommand("bound", "Evaluate a closed-form bound");
    std::string formula;
    bound->add_option("--formula", formula)
        ->required()
        ->check(CLI::IsMember({"main", "gaussian", "complexity-masked", "complexity-banded", "complexity-lv",
                               "classical", "bias-banded"}));
    ModelOptions mo_bound;
    mo_bound.add(bound, false);
    MaskOptions mask_bound("banded");
    mask_bound.add(bound);
    std::size_t b_n = 0;
    double b_col = 0, b_spec = 0, b_mu4 = 0, b_nu = 0, b_emax = 0, b_eps = 0, b_c = 1, b_ratio = 1, b_B = 0;
    int b_half = 0;
    bool b_shape = false;
    auto* o_n = bound->add_option("--n", b_n, "Sample size");
    auto* o_col = bound->add_option("--col-norm-sq", b_col, "Squared max column norm of the mask");
    auto* o_spec = bound->add_option("--spec-norm", b_spec, "Spectral norm of the mask");
    auto* o_mu4 = bound->add_option("--mu4", b_mu4, "Diagonal fourth moment");
    auto* o_nu = bound->add_option("--nu", b_nu, "Uniform fourth moment");
    auto* o_emax = bound->add_option("--emax", b_emax, "[E max ||x||_inf^4]^{1/2}");
    auto* o_eps = bound->add_option("--eps", b_eps, "Relative error target");
    bound->add_option("--c", b_c, "Absolute constant")->capture_default_str();
    auto* o_ratio = bound->add_option("--ratio", b_ratio, "||Sigma||_max / ||Sigma||");
    auto* o_B = bound->add_option("--B", b_B, "Bandwidth for complexity-banded");
    auto* o_b = bound->add_option("--b", b_half, "Half-bandwidth for bias-banded");
    bound->add_flag("--shape", b_shape, "gaussian: use the shape formula with --c instead of explicit constants");

    // experiment run
    auto* experiment = app.add_subcommand("experiment", "Monte Carlo experiments")->require_subcommand(1);
    auto* exp_run = experiment->add_subcommand("run", "Run a config file and write CSV results");
    std::string exp_config, exp_out;
    exp_run->add_option("--config", exp_config, "Experiment config (JSON)")->required();
    exp_run->add_option("--out", exp_out, "Results CSV")->required();
    exp_run->add_option("--seed", seed_flag, "Master seed (overrides MASKCOV_SEED and the config)");
    auto* exp_threads = exp_run->add_option("--threads", threads, "Worker threads, 0 = all cores");

    // verify
    auto* verify = app.add_subcommand("verify", "Monte Carlo checks of the matrix inequalities")->require_subcommand(1);

    auto* v_var = verify->add_subcommand("variance-lemma", "E (M o xx^T)^2 <= mu4^2 nu^2 ||M||_{1->2}^2 I");
    ModelOptions mo_var;
    mo_var.add(v_var, false);
    MaskOptions mask_var("banded");
    mask_var.add(v_var);
    add_run_opts(v_var, 10000);

    auto* v_schur = verify->add_subcommand("schur-lemma", "||M o xx^T|| <= ||M|| ||x||_inf^2");
    std::size_t schur_p = 32;
    v_schur->add_option("--p", schur_p, "Dimension")->capture_default_str();
    add_run_opts(v_schur, 10000);

    auto* v_emax = verify->add_subcommand("expected-max", "Expected maximum of ||x_k||_inf^4");
    ModelOptions mo_emax;
    mo_emax.add(v_emax, false);
    std::size_t emax_n = 0;
    std::vector<double> emax_grid;
    v_emax->add_option("--n", emax_n, "Samples per trial")->required();
    v_emax->add_option("--r-grid", emax_grid, "Orders r (default grid when omitted)");
    add_run_opts(v_emax, 2000);

    auto* v_sym = verify->add_subcommand("symmetrization", "E||sum (Z_i - EZ_i)|| <= 2 E||sum xi_i Z_i||");
    ModelOptions mo_sym;
    mo_sym.add(v_sym, true);
    MaskOptions mask_sym("banded");
    mask_sym.add(v_sym);
    std::size_t sym_n = 0;
    v_sym->add_option("--n", sym_n, "Samples per trial")->required();
    add_run_opts(v_sym, 500);

    auto* v_khin = verify->add_subcommand("khintchine", "Matrix Khintchine inequality");
    std::string khin_file;
    std::size_t khin_k = 5, khin_p = 4;
    double khin_r = 4;
    bool khin_exact = false;
    v_khin->add_option("--matrices", khin_file, "File of consecutive dense matrices (random when omitted)");
    v_khin->add_option("--k", khin_k, "Random ensemble size")->capture_default_str();
    v_khin->add_option("--p", khin_p, "Random ensemble dimension")->capture_default_str();
    v_khin->add_option("--r", khin_r, "Schatten order r >= 2")->capture_default_str();
    v_khin->add_flag("--exact", khin_exact, "Enumerate every sign pattern");
    add_run_opts(v_khin, 10000);

    auto* v_mom = verify->add_subcommand("moment-inequality", "Matrix moment inequality");
    ModelOptions mo_mom;
    mo_mom.default_p = 8;
    mo_mom.add(v_mom, false);
    MaskOptions mask_mom("all_ones");
    mask_mom.add(v_mom);
    std::size_t mom_k = 32;
    double mom_q = 2;
    std::string mom_part = "psd";
    v_mom->add_option("--k", mom_k, "Summands")->capture_default_str();
    v_mom->add_option("--q", mom_q, "Moment order")->capture_default_str();
    v_mom->add_option("--part", mom_part, "psd | selfadj")->capture_default_str();
    add_run_opts(v_mom, 2000);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        diagnostic(err, "usage", e.what());
        return kExitInvalid;
    }

    auto trials_or = [&](std::size_t fallback) { return trials ? trials : fallback; };

    try {
        if (mask_gen->parsed()) {
            Mask m;
            const MaskKind kind = mask_kind_from_string(mg_kind);
            if ((kind == MaskKind::banded || kind == MaskKind::tapered) && mg_bw->count() == 0) {
                throw std::invalid_argument("--bandwidth is required for " + mg_kind);
            }
            switch (kind) {
                case MaskKind::banded: m = banded_mask(mg_p, mg_bandwidth); break;
                case MaskKind::tapered: m = tapered_mask(mg_p, mg_bandwidth); break;
                case MaskKind::all_ones: m = all_ones_mask(mg_p); break;
                case MaskKind::custom: throw std::invalid_argument("mask gen builds banded, all_ones or tapered masks");
            }
            std::ostringstream buf;
            write_matrix(buf, m.matrix);
            emit_text(out, mg_out, buf.str());
            return kExitOk;
        }

        if (model_gen->parsed()) {
            const DistributionSpec model = mo_gen.distribution();
            if (gen_n < 1) throw std::invalid_argument("--n must be >= 1");
            const SampleSet s = draw_samples(model, gen_n, resolve_seed(seed_flag, 1));
            std::ostringstream buf;
            write_samples(buf, s);
            emit_text(out, gen_out, buf.str());
            if (!gen_sigma_out.empty()) {
                std::ostringstream sb;
                write_matrix(sb, model.covariance.materialize());
                write_file_atomic(gen_sigma_out, sb.str());
            }
            return kExitOk;
        }

        if (estimate->parsed()) {
            if (est_decompose && est_sigma.empty()) {
                throw std::invalid_argument("the bias term needs the true covariance: pass --sigma with --decompose");
            }
            const Mask mask = load_mask(est_mask);
            const SampleSet s = read_samples_file(est_samples);
            const SymMatrix estimate_m = masked_estimator(mask, s, est_centered);
            if (!est_out.empty() || !est_decompose) {
                std::ostringstream buf;
                write_matrix(buf, estimate_m);
                emit_text(out, est_out, buf.str());
            }
            if (est_decompose) {
                const ErrorDecomposition d = decompose_error(mask, read_matrix_file(est_sigma), s, est_centered);
                out << json{{"variance_term", d.variance_term},
                            {"bias_term", d.bias_term},
                            {"total_bound", d.total_bound},
                            {"total_actual", d.total_actual}}
                           .dump(2)
                    << '\n';
            }
            return kExitOk;
        }

        if (bound->parsed()) {
            const std::string ctx = "--formula " + formula;
            auto complexity = [&]() -> MaskComplexity {
                if (o_col->count() > 0 || o_spec->count() > 0) {
                    require(o_col, ctx);
                    require(o_spec, ctx);
                    return {b_col, b_spec};
                }
                require(mo_bound.p_opt, ctx);
                return mask_complexity(mask_bound.build(mo_bound.p));
            };
            json result;
            if (formula == "main") {
                for (auto* o : {o_n, mo_bound.p_opt, o_mu4, o_nu, o_emax}) require(o, ctx);
                ConcentrationParams cp;
                cp.mu[4.0] = b_mu4;
                cp.nu = b_nu;
                result = bound_json(main_bound(complexity(), cp, b_emax, b_n, mo_bound.p));
            } else if (formula == "gaussian") {
                require(o_n, ctx);
                const SymMatrix sigma = mo_bound.spec().materialize();
                result = bound_json(gaussian_bound(mask_bound.build(sigma.dim()), sigma, b_n, !b_shape, b_c));
            } else if (formula == "complexity-masked") {
                require(o_eps, ctx);
                const MaskComplexity mc = complexity();
                double ratio = b_ratio;
                if (o_ratio->count() == 0 && mo_bound.given()) {
                    const SymMatrix sigma = mo_bound.spec().materialize();
                    ratio = max_norm(sigma) / spectral_norm(sigma);
                }
                require(mo_bound.p_opt, ctx);
                const auto p = static_cast<double>(mo_bound.p);
                result = complexity_json(sample_complexity_masked(mc, p, ratio, b_eps, b_c),
                                         {{"col_norm_sq", mc.col_norm_sq}, {"spec_norm", mc.spec_norm},
                                          {"p", p}, {"ratio", ratio}, {"eps", b_eps}, {"c", b_c}});
            } else if (formula == "complexity-banded") {
                for (auto* o : {o_B, mo_bound.p_opt, o_eps}) require(o, ctx);
                const auto p = static_cast<double>(mo_bound.p);
                result = complexity_json(sample_complexity_banded(b_B, p, b_ratio, b_eps, b_c),
                                         {{"B", b_B}, {"p", p}, {"ratio", b_ratio}, {"eps", b_eps}, {"c", b_c}});
            } else if (formula == "complexity-lv") {
                require(o_eps, ctx);
                const MaskComplexity mc = complexity();
                require(mo_bound.p_opt, ctx);
                const auto p = static_cast<double>(mo_bound.p);
                result = complexity_json(sample_complexity_lv(mc, p, b_eps, b_c),
                                         {{"col_norm_sq", mc.col_norm_sq}, {"spec_norm", mc.spec_norm},
                                          {"p", p}, {"eps", b_eps}, {"c", b_c}});
            } else if (formula == "classical") {
                for (auto* o : {mo_bound.p_opt, o_eps}) require(o, ctx);
                const auto p = static_cast<double>(mo_bound.p);
                result = complexity_json(sample_complexity_classical(p, b_eps, b_c),
                                         {{"p", p}, {"eps", b_eps}, {"c", b_c}});
            } else {
                require(o_b, ctx);
                const BandedBias bb = banded_bias_bound(mo_bound.alpha, b_half);
                result = {{"formula", "bias-banded"},
                          {"bias_bound", bb.bias_bound},
                          {"sigma_norm_bound", bb.sigma_norm_bound},
                          {"inputs", {{"alpha", mo_bound.alpha}, {"b", b_half}}}};
            }
            out << result.dump(2) << '\n';
            return kExitOk;
        }

        if (exp_run->parsed()) {
            RunManifest manifest;
            manifest.started = utc_timestamp();
            manifest.command = joined(argc, argv);
            ParsedConfig parsed = parse_config(exp_config);
            if (!parsed.ok()) {
                diagnostic(err, "validation", "invalid config " + exp_config, {{"errors", parsed.errors}});
                return kExitInvalid;
            }
            ExperimentConfig cfg = *parsed.config;
            cfg.seed = resolve_seed(seed_flag, cfg.seed);
            if (exp_threads->count() > 0) cfg.threads = threads;

            std::vector<ScalingRow> rows;
            if (parsed.study) {
                rows = scaling_study(cfg, parsed.study->axis, parsed.study->values);
            } else {
                rows.push_back({static_cast<double>(cfg.n), run_variance_experiment(cfg)});
            }
            emit_csv(rows, exp_out);

            bool certified = true;
            for (const auto& r : rows) certified = certified && r.result.certified;
            manifest.config_hash = parsed.hash;
            manifest.outputs = {exp_out};
            manifest.finished = utc_timestamp();
            write_manifest(manifest, exp_out + ".manifest.json");
            out << json{{"rows", rows.size()},
                        {"out", exp_out},
                        {"config_hash", hex64(parsed.hash)},
                        {"seed", cfg.seed},
                        {"certified", certified}}
                       .dump()
                << '\n';
            return kExitOk;
        }

        const std::uint64_t seed = resolve_seed(seed_flag, 1);

        if (v_var->parsed()) {
            const DistributionSpec model = mo_var.distribution();
            const auto r = verify_variance_lemma(model, mask_var.build(model.covariance.dim()),
                                                 trials_or(10000), seed, threads);
            return report_check(out, err, "variance-lemma",
                                {{"lhs_lambda_max", r.lhs_lambda_max}, {"bound", r.bound},
                                 {"max_violation", r.max_violation}, {"std_error", r.std_error}},
                                r.holds);
        }

        if (v_schur->parsed()) {
            const auto r = verify_schur_norm_lemma(trials_or(10000), schur_p, seed, threads);
            return report_check(out, err, "schur-lemma",
                                {{"draws", r.draws}, {"violations", r.violations}, {"max_ratio", r.max_ratio}},
                                r.holds);
        }

        if (v_emax->parsed()) {
            const std::vector<double> grid = emax_grid.empty() ? default_r_grid() : emax_grid;
            const auto r = verify_expected_max_lemma(mo_emax.distribution(), emax_n, trials_or(2000), grid, seed,
                                                     threads);
            return report_check(out, err, "expected-max",
                                {{"empirical", r.empirical}, {"bound", r.bound}, {"ratio", r.ratio},
                                 {"std_error", r.std_error}},
                                r.holds);
        }

        if (v_sym->parsed()) {
            const DistributionSpec model = mo_sym.distribution();
            const auto r = verify_symmetrization(model, mask_sym.build(model.covariance.dim()), sym_n,
                                                 trials_or(500), seed, threads);
            return report_check(out, err, "symmetrization",
                                {{"lhs", r.lhs}, {"rhs", r.rhs}, {"lhs_se", r.lhs_se}, {"rhs_se", r.rhs_se}},
                                r.holds);
        }

        if (v_khin->parsed()) {
            std::vector<SymMatrix> matrices;
            if (!khin_file.empty()) {
                std::ifstream in(khin_file);
                if (!in) throw std::invalid_argument("cannot open " + khin_file);
                matrices = read_matrix_list(in);
            } else {
                matrices = random_symmetric_ensemble(khin_k, khin_p, derive_seed(seed, 0));
            }
            const auto r = verify_khintchine(matrices, khin_r, trials_or(10000), derive_seed(seed, 1), khin_exact);
            return report_check(out, err, "khintchine",
                                {{"lhs", r.lhs}, {"rhs", r.rhs}, {"std_error", r.std_error}, {"exact", r.exact},
                                 {"matrices", matrices.size()}, {"r", khin_r}},
                                r.holds);
        }

        if (v_mom->parsed()) {
            MomentEnsemble ensemble;
            ensemble.covariance = mo_mom.spec().materialize();
            ensemble.mask = mask_mom.build(ensemble.covariance.dim()).matrix;
            ensemble.summands = mom_k;
            const auto r = verify_moment_inequality(ensemble, mom_q, trials_or(2000), seed,
                                                    moment_part_from_string(mom_part), threads);
            return report_check(out, err, "moment-inequality",
                                {{"part", mom_part}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"r", r.r},
                                 {"first_input", r.first_input}, {"max_term", r.max_term},
                                 {"lhs_se", r.lhs_se}, {"rhs_se", r.rhs_se}},
                                r.holds);
        }
    } catch (const std::invalid_argument& e) {
        diagnostic(err, "validation", e.what());
        return kExitInvalid;
    } catch (const std::out_of_range& e) {
        diagnostic(err, "validation", e.what());
        return kExitInvalid;
    } catch (const std::exception& e) {
        diagnostic(err, "runtime", e.what());
        return kExitInvalid;
    }

    diagnostic(err, "usage", "no command given");
    return kExitInvalid;
}

}  // namespace maskcov
