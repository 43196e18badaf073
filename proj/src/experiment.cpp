#include "lse/experiment.hpp"

#include "lse/error.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

namespace lse {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
// fixed stream for the decoupled reference sample; independent of the
// configured simulation seed
constexpr std::uint64_t kDecoupledSeed = 0x6c73652d72656631ULL;

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

std::optional<double> to_double(std::string_view s)
{
    s = trim(s);
    if (s.empty())
        return std::nullopt;
    if (s.front() == '+')
        s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

double config_double(const ExperimentConfig& c, std::string_view key, double fallback)
{
    const auto v = c.get(key);
    if (!v)
        return fallback;
    const auto d = to_double(*v);
    if (!d)
        throw Error(ErrorCode::config_error, std::string(key) + ": not a number: '" + *v + "'");
    return *d;
}

long config_long(const ExperimentConfig& c, std::string_view key, long fallback)
{
    const auto v = c.get(key);
    if (!v)
        return fallback;
    long out = 0;
    const std::string_view s = trim(*v);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error(ErrorCode::config_error, std::string(key) + ": not an integer: '" + *v + "'");
    return out;
}

std::uint64_t config_u64(const ExperimentConfig& c, std::string_view key, std::uint64_t fallback)
{
    const auto v = c.get(key);
    if (!v)
        return fallback;
    std::uint64_t out = 0;
    const std::string_view s = trim(*v);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error(ErrorCode::config_error, std::string(key) + ": not an unsigned integer: '" + *v + "'");
    return out;
}

std::string config_string(const ExperimentConfig& c, std::string_view key, std::string_view fallback)
{
    return c.get(key).value_or(std::string(fallback));
}

std::vector<double> config_list(const ExperimentConfig& c, std::string_view key, double fallback)
{
    const auto v = c.get(key);
    if (!v)
        return {fallback};
    std::vector<double> out;
    for (auto item : split(*v, ',')) {
        const auto d = to_double(item);
        if (!d)
            throw Error(ErrorCode::config_error, std::string(key) + ": bad list entry '" + std::string(item) + "'");
        out.push_back(*d);
    }
    return out;
}

// PAPR list entries: a dB value, or "none"/"inf" for the full plane
std::vector<std::optional<double>> papr_list(const ExperimentConfig& c)
{
    const auto v = c.get("targets.papr_db");
    if (!v)
        return {std::nullopt};
    std::vector<std::optional<double>> out;
    for (auto item : split(*v, ',')) {
        if (item == "none" || item == "inf") {
            out.push_back(std::nullopt);
            continue;
        }
        const auto d = to_double(item);
        if (!d || !std::isfinite(*d))
            throw Error(ErrorCode::config_error, "targets.papr_db: bad entry '" + std::string(item) + "'");
        out.push_back(*d);
    }
    return out;
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double to_db(double v) { return 10.0 * std::log10(v); }

bool uses_targets(const ExperimentConfig& c)
{
    const bool direct = c.has("penalty.lambda") || c.has("penalty.lambda0");
    const bool targets = c.has("targets.p") || c.has("targets.eta") || c.has("targets.papr_db");
    if (direct && targets)
        throw Error(ErrorCode::config_error,
                    "give either penalty.lambda/lambda0 or targets.p/eta/papr_db, not both");
    if (!direct && !targets)
        throw Error(ErrorCode::config_error, "no penalty: set penalty.lambda or targets.p/targets.eta");
    return targets;
}

PenaltySpec direct_penalty(const ExperimentConfig& c)
{
    PenaltySpec pen;
    pen.lambda = config_double(c, "penalty.lambda", 0.0);
    pen.lambda0 = config_double(c, "penalty.lambda0", 0.0);
    const std::string support = config_string(c, "penalty.support", "full_plane");
    if (support == "disk") {
        if (!c.has("penalty.peak_power"))
            throw Error(ErrorCode::config_error, "penalty.support = disk needs penalty.peak_power");
        pen.support = Support::disk(config_double(c, "penalty.peak_power", 1.0));
    } else if (support != "full_plane") {
        throw Error(ErrorCode::config_error, "penalty.support: expected full_plane or disk");
    }
    try {
        pen.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::config_error, e.what());
    }
    return pen;
}

SolveOptions solve_options(const ExperimentConfig& c)
{
    SolveOptions o;
    o.damping = config_double(c, "solver.damping", o.damping);
    o.tol = config_double(c, "solver.tol", o.tol);
    o.max_iter = config_long(c, "solver.max_iter", o.max_iter);
    const std::string path = config_string(c, "solver.path", "closed_form");
    if (path == "quadrature")
        o.path = UpdatePath::quadrature;
    else if (path != "closed_form")
        throw Error(ErrorCode::config_error, "solver.path: expected closed_form or quadrature");
    if (!(o.damping > 0.0) || o.damping > 1.0 || !(o.tol > 0.0) || o.max_iter < 1)
        throw Error(ErrorCode::config_error, "solver: damping in (0, 1], tol > 0, max_iter >= 1");
    return o;
}

std::vector<double> alpha_inverse_grid(const ExperimentConfig& c)
{
    if (c.has("system.alpha")) {
        if (c.has("system.alpha_inverse"))
            throw Error(ErrorCode::config_error, "give system.alpha or system.alpha_inverse, not both");
        const double a = config_double(c, "system.alpha", 1.0);
        if (!(a > 0.0))
            throw Error(ErrorCode::config_error, "system.alpha must be positive");
        return {1.0 / a};
    }
    const auto grid = parse_grid(config_string(c, "system.alpha_inverse", "2"));
    for (double g : grid)
        if (!(g > 0.0))
            throw Error(ErrorCode::config_error, "system.alpha_inverse must be positive");
    return grid;
}

double single_alpha(const ExperimentConfig& c)
{
    if (c.has("system.alpha"))
        return config_double(c, "system.alpha", 1.0);
    const auto grid = alpha_inverse_grid(c);
    if (grid.size() != 1)
        throw Error(ErrorCode::config_error, "this mode needs a single system.alpha_inverse value");
    return 1.0 / grid.front();
}

double single_eta(const ExperimentConfig& c)
{
    const auto etas = config_list(c, "targets.eta", 1.0);
    if (etas.size() != 1)
        throw Error(ErrorCode::config_error, "this mode needs a single targets.eta value");
    return etas.front();
}

std::optional<double> single_papr(const ExperimentConfig& c)
{
    const auto paprs = papr_list(c);
    if (paprs.size() != 1)
        throw Error(ErrorCode::config_error, "this mode needs a single targets.papr_db value");
    return paprs.front();
}

void check_targets(const ExperimentConfig& c)
{
    if (c.has("penalty.support") && config_string(c, "penalty.support", "") == "disk" && !c.has("targets.papr_db"))
        throw Error(ErrorCode::config_error, "calibrated disk runs take targets.papr_db");
    for (double eta : config_list(c, "targets.eta", 1.0))
        if (!(eta > 0.0) || eta > 1.0)
            throw Error(ErrorCode::config_error, "targets.eta entries must lie in (0, 1]");
    if (!(config_double(c, "targets.p", 0.5) > 0.0))
        throw Error(ErrorCode::config_error, "targets.p must be positive");
}

SweepRow failed_row(double alpha_inverse, const std::string& status)
{
    SweepRow row;
    row.alpha_inverse = alpha_inverse;
    row.lambda = row.lambda0 = row.chi = row.p = row.eta = row.papr_db = row.distortion_db = row.residual = kNaN;
    row.iterations = 0;
    row.status = status;
    return row;
}

SweepRow row_from(double alpha_inverse, double lambda, double lambda0, const ReplicaSolution& sol)
{
    SweepRow row;
    row.alpha_inverse = alpha_inverse;
    row.lambda = lambda;
    row.lambda0 = lambda0;
    row.chi = sol.state.chi;
    row.p = sol.state.p;
    row.eta = sol.eta;
    row.papr_db = std::isfinite(sol.papr) ? to_db(sol.papr) : kInf;
    row.distortion_db = to_db(sol.distortion);
    row.residual = sol.residual;
    row.iterations = sol.iterations;
    return row;
}

struct ResolvedPoint {
    SweepRow row;
    PenaltySpec penalty;
    ReplicaSolution solution;
    double alpha = 1.0;
};

// replica solution at the configured single point; throws on failure
ResolvedPoint resolve_point(const ExperimentConfig& c)
{
    ResolvedPoint out;
    out.alpha = single_alpha(c);
    const double lambda_s = config_double(c, "system.lambda_s", 1.0);
    const SolveOptions opts = solve_options(c);
    if (uses_targets(c)) {
        check_targets(c);
        const double p = config_double(c, "targets.p", 0.5);
        const double eta = single_eta(c);
        const auto papr_db = single_papr(c);
        const SystemParams base = make_mp_system(out.alpha, lambda_s, PenaltySpec{});
        std::optional<double> papr;
        if (papr_db)
            papr = db_to_linear(*papr_db);
        const Calibration cal = calibrate(base, {p, eta, papr}, opts);
        out.penalty = cal.params.penalty;
        out.solution = cal.solution;
        out.row = row_from(1.0 / out.alpha, cal.lambda, cal.lambda0, cal.solution);
    } else {
        out.penalty = direct_penalty(c);
        const SystemParams params = make_mp_system(out.alpha, lambda_s, out.penalty);
        out.solution = solve_fixed_point(params, opts);
        out.row = row_from(1.0 / out.alpha, out.penalty.lambda, out.penalty.lambda0, out.solution);
    }
    return out;
}

// fn(i) for i in [0, count) on up to `threads` workers; fn must not throw
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn)
{
    const int workers = static_cast<int>(std::min<std::size_t>(std::max(1, threads), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++)
                fn(i);
        });
    for (auto& t : pool)
        t.join();
}

std::string status_of(const std::exception& e)
{
    if (const auto* le = dynamic_cast<const Error*>(&e))
        return to_string(le->code());
    return "Error";
}

std::string tag_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path.string());
    out << text;
    if (!out)
        throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io_error, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string xml_escape(std::string_view s)
{
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

} // namespace

Mode parse_mode(std::string_view name)
{
    static const std::pair<std::string_view, Mode> table[] = {
        {"replica", Mode::replica}, {"sweep", Mode::sweep},       {"simulate", Mode::simulate},
        {"compare", Mode::compare}, {"calibrate", Mode::calibrate}, {"saving", Mode::saving},
        {"plot", Mode::plot},
    };
    for (const auto& [n, m] : table)
        if (n == name)
            return m;
    throw Error(ErrorCode::config_error, "unknown mode '" + std::string(name) + "'");
}

const char* to_string(Mode mode) noexcept
{
    switch (mode) {
    case Mode::replica: return "replica";
    case Mode::sweep: return "sweep";
    case Mode::simulate: return "simulate";
    case Mode::compare: return "compare";
    case Mode::calibrate: return "calibrate";
    case Mode::saving: return "saving";
    case Mode::plot: return "plot";
    }
    return "?";
}

const std::vector<KeyDoc>& documented_keys()
{
    static const std::vector<KeyDoc> keys = {
        {"run.mode", "", "mode recorded by a manifest"},
        {"run.version", "", "library version recorded by a manifest"},
        {"system.alpha_inverse", "2", "inverse load n/k; a value, a list a, b, c or a range lo:step:hi"},
        {"system.alpha", "", "load k/n, single point; excludes system.alpha_inverse"},
        {"system.lambda_s", "1", "data symbol variance"},
        {"penalty.support", "full_plane", "full_plane or disk"},
        {"penalty.peak_power", "", "disk peak power P (direct specification)"},
        {"penalty.lambda", "", "power weight lambda (direct specification)"},
        {"penalty.lambda0", "0", "active-antenna weight lambda0 (direct specification)"},
        {"targets.p", "0.5", "target power per antenna"},
        {"targets.eta", "1", "target active fraction; a list in sweep and saving"},
        {"targets.papr_db", "none", "target PAPR in dB, puts the disk at papr * p; none = full plane"},
        {"solver.damping", "0.5", "fixed-point damping"},
        {"solver.tol", "1e-12", "fixed-point tolerance"},
        {"solver.max_iter", "100000", "fixed-point iteration cap"},
        {"solver.path", "closed_form", "closed_form or quadrature"},
        {"simulation.n", "400", "transmit antennas"},
        {"simulation.trials", "200", "Monte Carlo trials"},
        {"simulation.seed", "1", "master seed"},
        {"simulation.init", "rzf", "rzf or zero"},
        {"simulation.max_sweeps", "500", "CCD sweep cap"},
        {"simulation.tol", "1e-10", "CCD relative objective decrease"},
        {"simulation.step_tol", "1e-12", "CCD relative step size"},
        {"simulation.restarts", "1", "CCD restarts"},
        {"simulation.support_search", "auto", "auto, on or off"},
        {"simulation.zero_eps", "1e-9", "magnitude counted as inactive"},
        {"simulation.ks_draws", "1000000", "decoupled-law draws for the KS distance"},
        {"plot.inputs", "", "comma-separated sweep CSV paths"},
        {"plot.title", "", "plot title"},
        {"plot.output", "plot.svg", "SVG file name inside the output directory"},
    };
    return keys;
}

ExperimentConfig ExperimentConfig::parse(std::string_view text, std::string_view origin)
{
    ExperimentConfig cfg;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        const std::string where = std::string(origin) + ":" + std::to_string(line_no);
        if (line.empty() || line.front() == '#' || line.front() == ';')
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw Error(ErrorCode::config_error, where + ": unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section.empty())
                throw Error(ErrorCode::config_error, where + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::config_error, where + ": expected key = value");
        if (section.empty())
            throw Error(ErrorCode::config_error, where + ": key outside a section");
        const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
        if (cfg.has(key))
            throw Error(ErrorCode::config_error, where + ": duplicate key " + key);
        try {
            cfg.set(key, trim(line.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(ErrorCode::config_error, where + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path)
{
    return parse(read_file(path), path.string());
}

void ExperimentConfig::set(std::string_view key, std::string_view value)
{
    const auto& keys = documented_keys();
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const KeyDoc& d) { return key == d.key; });
    if (!known)
        throw Error(ErrorCode::config_error, "unknown key '" + std::string(key) + "'");
    value = trim(value);
    if (value.empty())
        throw Error(ErrorCode::config_error, "empty value for '" + std::string(key) + "'");
    if (value.find('\n') != std::string_view::npos)
        throw Error(ErrorCode::config_error, "multi-line value for '" + std::string(key) + "'");
    values_[std::string(key)] = std::string(value);
}

void ExperimentConfig::apply_override(std::string_view assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw Error(ErrorCode::config_error, "override '" + std::string(assignment) + "' is not key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::optional<std::string> ExperimentConfig::get(std::string_view key) const
{
    const auto it = values_.find(std::string(key));
    if (it == values_.end())
        return std::nullopt;
    return it->second;
}

void ExperimentConfig::erase(std::string_view key)
{
    values_.erase(std::string(key));
}

std::string ExperimentConfig::serialize() const
{
    std::string out;
    std::string section;
    for (const auto& [key, value] : values_) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!section.empty())
                out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

std::vector<double> parse_grid(std::string_view text)
{
    text = trim(text);
    std::vector<double> out;
    if (text.find(':') != std::string_view::npos) {
        const auto parts = split(text, ':');
        if (parts.size() != 3)
            throw Error(ErrorCode::config_error, "grid range must be lo:step:hi");
        const auto lo = to_double(parts[0]);
        const auto step = to_double(parts[1]);
        const auto hi = to_double(parts[2]);
        if (!lo || !step || !hi || !(*step > 0.0) || !(*hi >= *lo))
            throw Error(ErrorCode::config_error, "bad grid range '" + std::string(text) + "'");
        const long count = std::lround(std::floor((*hi - *lo) / *step + 1e-9)) + 1;
        for (long i = 0; i < count; ++i) {
            // round to 12 significant digits so 1.0:0.1:2.8 yields 1.1, not 1.1000000000000001
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.12g", *lo + static_cast<double>(i) * *step);
            out.push_back(std::strtod(buf, nullptr));
        }
    } else {
        for (auto item : split(text, ',')) {
            const auto v = to_double(item);
            if (!v || !std::isfinite(*v))
                throw Error(ErrorCode::config_error, "bad grid entry '" + std::string(item) + "'");
            out.push_back(*v);
        }
    }
    if (out.empty())
        throw Error(ErrorCode::config_error, "empty grid");
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i] > out[i - 1]))
            throw Error(ErrorCode::config_error, "grid must be strictly increasing");
    return out;
}

std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0.0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

static constexpr const char* kSweepHeader =
    "alpha_inverse,lambda,lambda0,chi,p,eta,papr_db,distortion_db,residual,iterations,status";

std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::string out = std::string(kSweepHeader) + "\n";
    for (const auto& r : rows) {
        for (double v : {r.alpha_inverse, r.lambda, r.lambda0, r.chi, r.p, r.eta, r.papr_db, r.distortion_db,
                         r.residual})
            out += format_number(v) + ",";
        out += std::to_string(r.iterations) + "," + r.status + "\n";
    }
    return out;
}

std::vector<SweepRow> parse_sweep_csv(std::string_view text)
{
    std::vector<SweepRow> rows;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        const std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        if (line.empty())
            continue;
        if (header) {
            if (line != kSweepHeader)
                throw Error(ErrorCode::schema_error, "unexpected sweep CSV header");
            header = false;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 11)
            throw Error(ErrorCode::schema_error, "sweep CSV row with " + std::to_string(f.size()) + " fields");
        double v[9];
        for (int i = 0; i < 9; ++i) {
            const auto d = to_double(f[static_cast<std::size_t>(i)]);
            if (!d)
                throw Error(ErrorCode::schema_error, "bad number '" + std::string(f[static_cast<std::size_t>(i)]) + "'");
            v[i] = *d;
        }
        SweepRow r{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], 0, std::string(f[10])};
        const auto it = to_double(f[9]);
        if (!it)
            throw Error(ErrorCode::schema_error, "bad iteration count");
        r.iterations = static_cast<long>(*it);
        rows.push_back(r);
    }
    if (header)
        throw Error(ErrorCode::schema_error, "empty sweep CSV");
    return rows;
}

SweepRow replica_point(const ExperimentConfig& config, double alpha_inverse, double eta_target,
                       std::optional<double> papr_db)
{
    try {
        const double alpha = 1.0 / alpha_inverse;
        const double lambda_s = config_double(config, "system.lambda_s", 1.0);
        const SolveOptions opts = solve_options(config);
        if (uses_targets(config)) {
            const double p = config_double(config, "targets.p", 0.5);
            std::optional<double> papr;
            if (papr_db)
                papr = db_to_linear(*papr_db);
            const Calibration cal =
                calibrate(make_mp_system(alpha, lambda_s, PenaltySpec{}), {p, eta_target, papr}, opts);
            return row_from(alpha_inverse, cal.lambda, cal.lambda0, cal.solution);
        }
        const PenaltySpec pen = direct_penalty(config);
        const ReplicaSolution sol = solve_fixed_point(make_mp_system(alpha, lambda_s, pen), opts);
        return row_from(alpha_inverse, pen.lambda, pen.lambda0, sol);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::config_error)
            throw;
        return failed_row(alpha_inverse, to_string(e.code()));
    }
}

std::vector<SweepCurve> run_replica_sweep(const ExperimentConfig& config, int threads)
{
    if (!uses_targets(config))
        throw Error(ErrorCode::config_error, "sweep needs calibration targets");
    check_targets(config);
    solve_options(config);
    const auto grid = alpha_inverse_grid(config);
    std::vector<SweepCurve> curves;
    for (double eta : config_list(config, "targets.eta", 1.0)) {
        for (const auto& papr : papr_list(config)) {
            SweepCurve c;
            c.eta_target = eta;
            c.papr_db = papr;
            c.file_name = "sweep_eta" + tag_number(eta) + "_papr" + (papr ? tag_number(*papr) + "dB" : "none") + ".csv";
            c.rows.resize(grid.size());
            curves.push_back(std::move(c));
        }
    }
    const std::size_t per = grid.size();
    parallel_for(curves.size() * per, threads, [&](std::size_t i) {
        SweepCurve& c = curves[i / per];
        const double ai = grid[i % per];
        try {
            c.rows[i % per] = replica_point(config, ai, c.eta_target, c.papr_db);
        } catch (const std::exception& e) {
            c.rows[i % per] = failed_row(ai, status_of(e));
        }
    });
    return curves;
}

MonteCarloConfig simulation_config(const ExperimentConfig& c, const PenaltySpec& penalty, double alpha,
                                   int threads)
{
    MonteCarloConfig mc;
    mc.n = static_cast<int>(config_long(c, "simulation.n", 400));
    if (mc.n < 1)
        throw Error(ErrorCode::config_error, "simulation.n must be positive");
    mc.k = static_cast<int>(std::lround(alpha * mc.n));
    if (mc.k < 1)
        throw Error(ErrorCode::config_error, "simulation.n * alpha rounds to zero users");
    mc.lambda_s = config_double(c, "system.lambda_s", 1.0);
    mc.penalty = penalty;
    mc.trials = static_cast<int>(config_long(c, "simulation.trials", 200));
    if (mc.trials < 2)
        throw Error(ErrorCode::config_error, "simulation.trials must be at least 2");
    mc.master_seed = config_u64(c, "simulation.seed", 1);
    mc.threads = std::max(1, threads);
    mc.zero_eps = config_double(c, "simulation.zero_eps", 1e-9);
    const std::string init = config_string(c, "simulation.init", "rzf");
    if (init == "zero")
        mc.solver.init = CcdInit::zero;
    else if (init != "rzf")
        throw Error(ErrorCode::config_error, "simulation.init: expected rzf or zero");
    mc.solver.max_sweeps = static_cast<int>(config_long(c, "simulation.max_sweeps", 500));
    mc.solver.tol = config_double(c, "simulation.tol", 1e-10);
    mc.solver.step_tol = config_double(c, "simulation.step_tol", 1e-12);
    mc.solver.restarts = static_cast<int>(config_long(c, "simulation.restarts", 1));
    if (mc.solver.max_sweeps < 1 || mc.solver.restarts < 1)
        throw Error(ErrorCode::config_error, "simulation.max_sweeps and simulation.restarts must be positive");
    const std::string ss = config_string(c, "simulation.support_search", "auto");
    if (ss == "on")
        mc.solver.support_search = true;
    else if (ss == "off")
        mc.solver.support_search = false;
    else if (ss != "auto")
        throw Error(ErrorCode::config_error, "simulation.support_search: expected auto, on or off");
    return mc;
}

CompareReport run_compare(const ExperimentConfig& config, int threads)
{
    const ResolvedPoint pt = resolve_point(config);
    CompareReport rep;
    rep.replica = pt.row;
    rep.simulation = monte_carlo(simulation_config(config, pt.penalty, pt.alpha, threads));

    const auto& sol = pt.solution;
    const auto& sim = rep.simulation;
    auto line = [](std::string q, double r, const Estimate& e) {
        return ComparisonLine{std::move(q), r, e.mean, e.ci95, (e.mean - r) / r};
    };
    rep.lines.push_back(line("distortion", sol.distortion, sim.distortion));
    rep.lines.push_back(line("power", sol.state.p, sim.power));
    rep.lines.push_back(line("eta", sol.eta, sim.eta));
    rep.lines.push_back(line("papr", sol.papr, sim.papr));

    const auto draws = static_cast<std::size_t>(config_long(config, "simulation.ks_draws", 1000000));
    if (draws < 1)
        throw Error(ErrorCode::config_error, "simulation.ks_draws must be positive");
    RandomStream stream(kDecoupledSeed, 0);
    const auto reference = decoupled_sample(sol.state, pt.penalty, stream, draws);
    std::vector<double> ref_mag;
    ref_mag.reserve(reference.size());
    for (cplx v : reference)
        ref_mag.push_back(std::abs(v));
    std::vector<double> pooled = sim.magnitudes_first_half;
    pooled.insert(pooled.end(), sim.magnitudes_second_half.begin(), sim.magnitudes_second_half.end());
    rep.ks_decoupled = ks_distance(pooled, ref_mag);
    rep.ks_halves = ks_distance(sim.magnitudes_first_half, sim.magnitudes_second_half);
    return rep;
}

std::string compare_csv(const CompareReport& report)
{
    std::string out = "quantity,replica,empirical,ci95,relative_gap\n";
    for (const auto& l : report.lines)
        out += l.quantity + "," + format_number(l.replica) + "," + format_number(l.empirical) + ","
            + format_number(l.ci95) + "," + format_number(l.relative_gap) + "\n";
    out += "ks_decoupled,nan," + format_number(report.ks_decoupled) + ",nan,nan\n";
    out += "ks_halves,nan," + format_number(report.ks_halves) + ",nan,nan\n";
    return out;
}

SavingRow antenna_saving_point(double alpha_inverse, double lambda_s, double p_target, double eta,
                               std::optional<double> papr_db, const SolveOptions& opts)
{
    const SystemParams base = make_mp_system(1.0 / alpha_inverse, lambda_s, PenaltySpec{});
    std::optional<double> papr;
    if (papr_db)
        papr = db_to_linear(*papr_db);
    const double d_opt = calibrate(base, {p_target, eta, papr}, opts).solution.distortion;
    auto gap = [&](double eta_r) {
        return random_tas_baseline(base, eta_r, p_target, papr, opts).calibration.solution.distortion - d_opt;
    };

    const PartialFn maybe = [&](double eta_r) -> std::optional<double> {
        try {
            return gap(eta_r);
        } catch (const Error&) {
            return std::nullopt;
        }
    };
    const auto full = maybe(1.0);
    if (!full)
        throw Error(ErrorCode::not_achievable, "random TAS with all antennas cannot meet the power target");
    if (*full > 0.0)
        throw Error(ErrorCode::not_achievable, "random TAS with all antennas stays above the optimal-TAS distortion");
    // down from all antennas; fractions whose subsystem cannot be solved are skipped
    const auto hit = scan_for_bracket(maybe, 1.0, -0.05, 0.05);
    if (!hit)
        throw Error(ErrorCode::not_achievable, "no random-TAS fraction matches the optimal-TAS distortion");
    SavingRow row;
    row.alpha_inverse = alpha_inverse;
    row.eta = eta;
    row.papr_db = papr_db.value_or(kInf);
    row.distortion_db = to_db(d_opt);
    row.eta_random = hit->exact ? hit->lo : find_root_1d(gap, hit->lo, hit->hi, 1e-10);
    row.saving = row.eta_random - eta;
    return row;
}

std::vector<SavingRow> run_antenna_saving(const ExperimentConfig& config, int threads)
{
    if (!uses_targets(config))
        throw Error(ErrorCode::config_error, "saving needs calibration targets");
    check_targets(config);
    const SolveOptions opts = solve_options(config);
    const auto grid = alpha_inverse_grid(config);
    const double lambda_s = config_double(config, "system.lambda_s", 1.0);
    const double p = config_double(config, "targets.p", 0.5);
    struct Task {
        double eta;
        std::optional<double> papr;
        double ai;
    };
    std::vector<Task> tasks;
    for (double eta : config_list(config, "targets.eta", 1.0))
        for (const auto& papr : papr_list(config))
            for (double ai : grid)
                tasks.push_back({eta, papr, ai});
    std::vector<SavingRow> rows(tasks.size());
    parallel_for(tasks.size(), threads, [&](std::size_t i) {
        const Task& t = tasks[i];
        try {
            rows[i] = antenna_saving_point(t.ai, lambda_s, p, t.eta, t.papr, opts);
        } catch (const std::exception& e) {
            SavingRow r;
            r.alpha_inverse = t.ai;
            r.eta = t.eta;
            r.papr_db = t.papr.value_or(kInf);
            r.distortion_db = r.eta_random = r.saving = kNaN;
            r.status = status_of(e);
            rows[i] = r;
        }
    });
    return rows;
}

std::string saving_csv(const std::vector<SavingRow>& rows)
{
    std::string out = "alpha_inverse,eta,papr_db,distortion_db,eta_random,saving,status\n";
    for (const auto& r : rows) {
        for (double v : {r.alpha_inverse, r.eta, r.papr_db, r.distortion_db, r.eta_random, r.saving})
            out += format_number(v) + ",";
        out += r.status + "\n";
    }
    return out;
}

PlotCurve read_plot_curve(const fs::path& csv)
{
    const std::string text = read_file(csv);
    PlotCurve curve;
    curve.label = csv.stem().string();
    std::size_t pos = 0;
    std::vector<std::string_view> header;
    std::size_t xi = 0;
    std::size_t yi = 0;
    std::size_t line_no = 0;
    const std::string_view view(text);
    while (pos < view.size()) {
        auto end = view.find('\n', pos);
        if (end == std::string_view::npos)
            end = view.size();
        const std::string_view line = trim(view.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty())
            continue;
        const auto fields = split(line, ',');
        const std::string where = csv.string() + ":" + std::to_string(line_no);
        if (header.empty()) {
            header = fields;
            const auto fx = std::find(header.begin(), header.end(), "alpha_inverse");
            const auto fy = std::find(header.begin(), header.end(), "distortion_db");
            if (fx == header.end() || fy == header.end())
                throw Error(ErrorCode::schema_error, where + ": missing alpha_inverse or distortion_db column");
            xi = static_cast<std::size_t>(fx - header.begin());
            yi = static_cast<std::size_t>(fy - header.begin());
            continue;
        }
        if (fields.size() != header.size())
            throw Error(ErrorCode::schema_error, where + ": field count differs from header");
        const auto x = to_double(fields[xi]);
        const auto y = to_double(fields[yi]);
        if (!x || !y)
            throw Error(ErrorCode::schema_error, where + ": non-numeric value");
        if (!std::isfinite(*x) || !std::isfinite(*y))
            continue;
        curve.x.push_back(*x);
        curve.y.push_back(*y);
    }
    if (header.empty())
        throw Error(ErrorCode::schema_error, csv.string() + ": empty file");
    return curve;
}

namespace {

std::vector<double> nice_ticks(double lo, double hi, int target)
{
    const double span = hi - lo;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        step = m * mag;
        if (span / step <= target)
            break;
    }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + 1e-9 * step; t += step)
        ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    return ticks;
}

std::string fixed2(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

std::string emit_plot(const std::vector<PlotCurve>& curves, std::string_view title)
{
    if (curves.empty())
        throw Error(ErrorCode::schema_error, "emit_plot: no curves");
    double xmin = kInf, xmax = -kInf, ymin = kInf, ymax = -kInf;
    for (const auto& c : curves) {
        if (c.x.size() != c.y.size())
            throw Error(ErrorCode::schema_error, "emit_plot: x and y lengths differ");
        for (std::size_t i = 0; i < c.x.size(); ++i) {
            xmin = std::min(xmin, c.x[i]);
            xmax = std::max(xmax, c.x[i]);
            ymin = std::min(ymin, c.y[i]);
            ymax = std::max(ymax, c.y[i]);
        }
    }
    if (!std::isfinite(xmin) || !std::isfinite(ymin))
        throw Error(ErrorCode::schema_error, "emit_plot: no finite points");
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    constexpr double W = 640, H = 420, L = 70, R = 170, T = 40, B = 60;
    const double pw = W - L - R, ph = H - T - B;
    auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return T + (ymax - y) / (ymax - ymin) * ph; };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"420\" "
         "viewBox=\"0 0 640 420\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"white\"/>\n";
    if (!title.empty())
        s += "<text x=\"" + fixed2(L + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
            + xml_escape(title) + "</text>\n";
    s += "<rect x=\"" + fixed2(L) + "\" y=\"" + fixed2(T) + "\" width=\"" + fixed2(pw) + "\" height=\""
        + fixed2(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : nice_ticks(xmin, xmax, 8)) {
        const std::string x = fixed2(sx(t));
        s += "<line x1=\"" + x + "\" y1=\"" + fixed2(T + ph) + "\" x2=\"" + x + "\" y2=\"" + fixed2(T + ph + 5)
            + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + x + "\" y=\"" + fixed2(T + ph + 18) + "\" text-anchor=\"middle\">" + tag_number(t)
            + "</text>\n";
    }
    for (double t : nice_ticks(ymin, ymax, 6)) {
        const std::string y = fixed2(sy(t));
        s += "<line x1=\"" + fixed2(L - 5) + "\" y1=\"" + y + "\" x2=\"" + fixed2(L) + "\" y2=\"" + y
            + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + fixed2(L - 8) + "\" y=\"" + fixed2(sy(t) + 4) + "\" text-anchor=\"end\">"
            + tag_number(t) + "</text>\n";
    }
    s += "<text x=\"" + fixed2(L + pw / 2) + "\" y=\"" + fixed2(H - 15)
        + "\" text-anchor=\"middle\">\xCE\xB1\xE2\x81\xBB\xC2\xB9</text>\n";
    s += "<text x=\"18\" y=\"" + fixed2(T + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        + fixed2(T + ph / 2) + ")\">D in [dB]</text>\n";

    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& c = curves[i];
        const char* color = palette[i % std::size(palette)];
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t j = 0; j < c.x.size(); ++j)
            s += (j ? " " : "") + fixed2(sx(c.x[j])) + "," + fixed2(sy(c.y[j]));
        s += "\"/>\n";
        const double ly = T + 10 + 18.0 * static_cast<double>(i);
        s += "<line x1=\"" + fixed2(L + pw + 12) + "\" y1=\"" + fixed2(ly) + "\" x2=\"" + fixed2(L + pw + 32)
            + "\" y2=\"" + fixed2(ly) + "\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
        s += "<text x=\"" + fixed2(L + pw + 38) + "\" y=\"" + fixed2(ly + 4) + "\" font-size=\"10\">"
            + xml_escape(c.label) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

std::string emit_plot(const std::vector<fs::path>& csvs, std::string_view title)
{
    if (csvs.empty())
        throw Error(ErrorCode::schema_error, "emit_plot: no input files");
    std::vector<PlotCurve> curves;
    for (const auto& p : csvs)
        curves.push_back(read_plot_curve(p));
    return emit_plot(curves, title);
}

std::vector<fs::path> run_experiment(const ExperimentConfig& config_in, Mode mode, const RunOptions& opts)
{
    ExperimentConfig config = config_in;
    if (const auto recorded = config.get("run.mode"); recorded && *recorded != to_string(mode))
        throw Error(ErrorCode::config_error,
                    "config records mode " + *recorded + " but " + to_string(mode) + " was requested");
    std::error_code ec;
    fs::create_directories(opts.out_dir, ec);
    if (ec)
        throw Error(ErrorCode::io_error, "cannot create " + opts.out_dir.string() + ": " + ec.message());

    std::vector<fs::path> written;
    auto emit = [&](const std::string& name, const std::string& text) {
        const fs::path p = opts.out_dir / name;
        write_file(p, text);
        written.push_back(p);
    };

    switch (mode) {
    case Mode::replica:
    case Mode::calibrate: {
        if (mode == Mode::calibrate && !uses_targets(config))
            throw Error(ErrorCode::config_error, "calibrate needs targets.p/targets.eta");
        const ResolvedPoint pt = resolve_point(config);
        emit(mode == Mode::replica ? "replica.csv" : "calibration.csv", sweep_csv({pt.row}));
        break;
    }
    case Mode::sweep: {
        const auto curves = run_replica_sweep(config, opts.threads);
        std::vector<PlotCurve> plot;
        for (const auto& c : curves) {
            emit(c.file_name, sweep_csv(c.rows));
            PlotCurve pc;
            pc.label = fs::path(c.file_name).stem().string();
            for (const auto& r : c.rows)
                if (std::isfinite(r.distortion_db)) {
                    pc.x.push_back(r.alpha_inverse);
                    pc.y.push_back(r.distortion_db);
                }
            plot.push_back(pc);
        }
        bool any = false;
        for (const auto& pc : plot)
            any = any || !pc.x.empty();
        if (any)
            emit("sweep.svg", emit_plot(plot, config_string(config, "plot.title", "")));
        break;
    }
    case Mode::simulate: {
        const ResolvedPoint pt = resolve_point(config);
        const MonteCarloReport rep = monte_carlo(simulation_config(config, pt.penalty, pt.alpha, opts.threads));
        std::string csv = "metric,mean,ci95\n";
        auto add = [&](const char* name, const Estimate& e) {
            csv += std::string(name) + "," + format_number(e.mean) + "," + format_number(e.ci95) + "\n";
        };
        add("distortion", rep.distortion);
        add("power", rep.power);
        add("eta", rep.eta);
        add("papr", rep.papr);
        csv += "mean_sweeps," + format_number(rep.mean_sweeps) + ",nan\n";
        emit("simulate.csv", csv);
        std::string hist = "bin_lo,bin_hi,pooled,first_half,second_half\n";
        const auto& h = rep.magnitude_histogram;
        const double width = (h.hi - h.lo) / static_cast<double>(h.mass.size());
        for (std::size_t b = 0; b < h.mass.size(); ++b)
            hist += format_number(h.lo + width * static_cast<double>(b)) + ","
                + format_number(h.lo + width * static_cast<double>(b + 1)) + "," + format_number(h.mass[b]) + ","
                + format_number(rep.first_half_histogram.mass[b]) + ","
                + format_number(rep.second_half_histogram.mass[b]) + "\n";
        emit("histogram.csv", hist);
        std::string trials = "trial,distortion,power,eta,papr\n";
        for (std::size_t t = 0; t < rep.per_trial.size(); ++t) {
            const auto& m = rep.per_trial[t];
            trials += std::to_string(t) + "," + format_number(m.distortion) + "," + format_number(m.power) + ","
                + format_number(m.eta) + "," + format_number(m.papr) + "\n";
        }
        emit("trials.csv", trials);
        break;
    }
    case Mode::compare: {
        const CompareReport rep = run_compare(config, opts.threads);
        emit("compare.csv", compare_csv(rep));
        emit("replica.csv", sweep_csv({rep.replica}));
        break;
    }
    case Mode::saving:
        emit("saving.csv", saving_csv(run_antenna_saving(config, opts.threads)));
        break;
    case Mode::plot: {
        const auto inputs = config.get("plot.inputs");
        if (!inputs)
            throw Error(ErrorCode::config_error, "plot needs plot.inputs");
        std::vector<fs::path> csvs;
        for (auto item : split(*inputs, ','))
            if (!item.empty())
                csvs.emplace_back(std::string(item));
        emit(config_string(config, "plot.output", "plot.svg"), emit_plot(csvs, config_string(config, "plot.title", "")));
        break;
    }
    }

    config.set("run.mode", to_string(mode));
    config.set("run.version", kVersion);
    if (mode == Mode::simulate || mode == Mode::compare)
        config.set("simulation.seed", std::to_string(config_u64(config, "simulation.seed", 1)));
    emit("manifest.txt", config.serialize());
    return written;
}

} // namespace lse
