#include "lse/lse.h"

#include "lse/error.hpp"
#include "lse/experiment.hpp"
#include "lse/replica.hpp"

#include <cmath>
#include <cstring>
#include <new>
#include <string>

struct lse_config {
    lse::ExperimentConfig impl;
};

struct lse_system {
    lse::SystemParams params;
};

namespace {

thread_local std::string g_last_error;

lse_status status_from(lse::ErrorCode code)
{
    using lse::ErrorCode;
    switch (code) {
    case ErrorCode::invalid_argument: return LSE_INVALID_ARGUMENT;
    case ErrorCode::no_sign_change: return LSE_NO_SIGN_CHANGE;
    case ErrorCode::non_finite: return LSE_NON_FINITE;
    case ErrorCode::empty_sample: return LSE_EMPTY_SAMPLE;
    case ErrorCode::non_positive_alpha: return LSE_NON_POSITIVE_ALPHA;
    case ErrorCode::invalid_state: return LSE_INVALID_STATE;
    case ErrorCode::no_convergence: return LSE_NO_CONVERGENCE;
    case ErrorCode::not_achievable: return LSE_NOT_ACHIEVABLE;
    case ErrorCode::out_of_support: return LSE_OUT_OF_SUPPORT;
    case ErrorCode::singular_system: return LSE_SINGULAR_SYSTEM;
    case ErrorCode::degenerate_column: return LSE_DEGENERATE_COLUMN;
    case ErrorCode::config_error: return LSE_CONFIG_ERROR;
    case ErrorCode::schema_error: return LSE_SCHEMA_ERROR;
    case ErrorCode::io_error: return LSE_IO_ERROR;
    }
    return LSE_INTERNAL_ERROR;
}

lse_status fail(lse_status s, const char* msg)
{
    g_last_error = msg;
    return s;
}

template <class F>
lse_status guarded(F&& f)
{
    try {
        f();
        g_last_error.clear();
        return LSE_OK;
    } catch (const lse::Error& e) {
        return fail(status_from(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(LSE_INTERNAL_ERROR, "out of memory");
    } catch (const std::exception& e) {
        return fail(LSE_INTERNAL_ERROR, e.what());
    } catch (...) {
        return fail(LSE_INTERNAL_ERROR, "unknown exception");
    }
}

lse_status copy_out(const std::string& value, char* buf, size_t size, size_t* needed)
{
    if (needed)
        *needed = value.size() + 1;
    if (!buf || size < value.size() + 1)
        return fail(LSE_BUFFER_TOO_SMALL, "buffer too small");
    std::memcpy(buf, value.c_str(), value.size() + 1);
    g_last_error.clear();
    return LSE_OK;
}

lse::PenaltySpec to_spec(const lse_penalty& p)
{
    lse::PenaltySpec spec;
    spec.lambda = p.lambda;
    spec.lambda0 = p.lambda0;
    if (p.support == LSE_DISK)
        spec.support = lse::Support::disk(p.peak_power);
    else if (p.support != LSE_FULL_PLANE)
        throw lse::Error(lse::ErrorCode::invalid_argument, "unknown support kind");
    spec.validate();
    return spec;
}

lse_penalty from_spec(const lse::PenaltySpec& s)
{
    lse_penalty p{};
    p.lambda = s.lambda;
    p.lambda0 = s.lambda0;
    p.support = s.support.kind == lse::SupportKind::disk ? LSE_DISK : LSE_FULL_PLANE;
    p.peak_power = s.support.peak_power;
    return p;
}

void fill(lse_replica_result* out, const lse::PenaltySpec& pen, const lse::ReplicaSolution& sol)
{
    out->lambda = pen.lambda;
    out->lambda0 = pen.lambda0;
    out->chi = sol.state.chi;
    out->p = sol.state.p;
    out->lambda_rs = sol.state.lambda_rs;
    out->kappa = sol.state.kappa;
    out->distortion = sol.distortion;
    out->eta = sol.eta;
    out->papr = sol.papr;
    out->residual = sol.residual;
    out->iterations = sol.iterations;
}

} // namespace

extern "C" {

const char* lse_version(void) { return lse::kVersion; }

const char* lse_status_name(lse_status status)
{
    switch (status) {
    case LSE_OK: return "Ok";
    case LSE_BUFFER_TOO_SMALL: return "BufferTooSmall";
    case LSE_INTERNAL_ERROR: return "InternalError";
    default: break;
    }
    if (status > LSE_OK && status < LSE_BUFFER_TOO_SMALL)
        return lse::to_string(static_cast<lse::ErrorCode>(status - 1));
    return "Unknown";
}

const char* lse_last_error(void) { return g_last_error.c_str(); }

lse_status lse_config_create(lse_config** out)
{
    if (!out)
        return fail(LSE_INVALID_ARGUMENT, "null output handle");
    return guarded([&] { *out = new lse_config{}; });
}

lse_status lse_config_parse(const char* text, lse_config** out)
{
    if (!text || !out)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] { *out = new lse_config{lse::ExperimentConfig::parse(text)}; });
}

lse_status lse_config_load(const char* path, lse_config** out)
{
    if (!path || !out)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] { *out = new lse_config{lse::ExperimentConfig::load(path)}; });
}

void lse_config_destroy(lse_config* config) { delete config; }

lse_status lse_config_set(lse_config* config, const char* key, const char* value)
{
    if (!config || !key || !value)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] { config->impl.set(key, value); });
}

lse_status lse_config_override(lse_config* config, const char* assignment)
{
    if (!config || !assignment)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] { config->impl.apply_override(assignment); });
}

lse_status lse_config_get(const lse_config* config, const char* key, char* buf, size_t size, size_t* needed)
{
    if (!config || !key)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    const auto v = config->impl.get(key);
    if (!v)
        return fail(LSE_CONFIG_ERROR, "key is not set");
    return copy_out(*v, buf, size, needed);
}

lse_status lse_config_serialize(const lse_config* config, char* buf, size_t size, size_t* needed)
{
    if (!config)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return copy_out(config->impl.serialize(), buf, size, needed);
}

lse_status lse_run(const lse_config* config, const char* mode, const lse_run_options* options)
{
    if (!config || !mode)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        lse::RunOptions opts;
        if (options) {
            if (options->out_dir)
                opts.out_dir = options->out_dir;
            opts.threads = options->threads > 0 ? options->threads : 1;
        }
        lse::run_experiment(config->impl, lse::parse_mode(mode), opts);
    });
}

lse_status lse_plot(const char* const* csv_paths, size_t count, const char* title, const char* svg_path)
{
    if ((!csv_paths && count) || !svg_path)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        std::vector<std::filesystem::path> paths;
        for (size_t i = 0; i < count; ++i) {
            if (!csv_paths[i])
                throw lse::Error(lse::ErrorCode::invalid_argument, "null CSV path");
            paths.emplace_back(csv_paths[i]);
        }
        const std::string svg = lse::emit_plot(paths, title ? title : "");
        std::FILE* f = std::fopen(svg_path, "wb");
        if (!f)
            throw lse::Error(lse::ErrorCode::io_error, std::string("cannot write ") + svg_path);
        const bool ok = std::fwrite(svg.data(), 1, svg.size(), f) == svg.size();
        if (std::fclose(f) != 0 || !ok)
            throw lse::Error(lse::ErrorCode::io_error, std::string("write failed for ") + svg_path);
    });
}

lse_status lse_system_create(double alpha, double lambda_s, const lse_penalty* penalty, lse_system** out)
{
    if (!out)
        return fail(LSE_INVALID_ARGUMENT, "null output handle");
    return guarded([&] {
        const lse::PenaltySpec spec = penalty ? to_spec(*penalty) : lse::PenaltySpec{};
        *out = new lse_system{lse::make_mp_system(alpha, lambda_s, spec)};
    });
}

void lse_system_destroy(lse_system* system) { delete system; }

lse_status lse_system_solve(const lse_system* system, lse_replica_result* out)
{
    if (!system || !out)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] { fill(out, system->params.penalty, lse::solve_fixed_point(system->params)); });
}

lse_status lse_system_calibrate(lse_system* system, double p, double eta, double papr, lse_replica_result* out)
{
    if (!system || !out)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        lse::CalibrationTargets t{p, eta, std::nullopt};
        if (papr > 0.0)
            t.papr = papr;
        const lse::Calibration cal = lse::calibrate(system->params, t);
        system->params = cal.params;
        fill(out, cal.params.penalty, cal.solution);
    });
}

lse_status lse_system_penalty(const lse_system* system, lse_penalty* out)
{
    if (!system || !out)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    *out = from_spec(system->params.penalty);
    g_last_error.clear();
    return LSE_OK;
}

lse_status lse_prox(const lse_penalty* penalty, double z_re, double z_im, double c, double* out_re,
                    double* out_im)
{
    if (!penalty || !out_re || !out_im)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        if (!(c > 0.0) || !std::isfinite(z_re) || !std::isfinite(z_im))
            throw lse::Error(lse::ErrorCode::invalid_argument, "prox needs finite z and c > 0");
        const lse::cplx v = lse::prox(to_spec(*penalty), {z_re, z_im}, c);
        *out_re = v.real();
        *out_im = v.imag();
    });
}

lse_status lse_q_function(double x, double* out)
{
    if (!out)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] { *out = lse::q_function(x); });
}

lse_status lse_antenna_saving(double alpha_inverse, double lambda_s, double p, double eta, double papr_db,
                              double* eta_random)
{
    if (!eta_random)
        return fail(LSE_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        if (!(alpha_inverse > 0.0))
            throw lse::Error(lse::ErrorCode::non_positive_alpha, "alpha_inverse must be positive");
        std::optional<double> papr;
        if (!std::isnan(papr_db))
            papr = papr_db;
        *eta_random = lse::antenna_saving_point(alpha_inverse, lambda_s, p, eta, papr).eta_random;
    });
}

} // extern "C"
