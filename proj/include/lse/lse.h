#ifndef LSE_LSE_H
#define LSE_LSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  ifdef LSE_BUILDING_CAPI
#    define LSE_API __declspec(dllexport)
#  else
#    define LSE_API __declspec(dllimport)
#  endif
#else
#  define LSE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lse_status {
    LSE_OK = 0,
    LSE_INVALID_ARGUMENT,
    LSE_NO_SIGN_CHANGE,
    LSE_NON_FINITE,
    LSE_EMPTY_SAMPLE,
    LSE_NON_POSITIVE_ALPHA,
    LSE_INVALID_STATE,
    LSE_NO_CONVERGENCE,
    LSE_NOT_ACHIEVABLE,
    LSE_OUT_OF_SUPPORT,
    LSE_SINGULAR_SYSTEM,
    LSE_DEGENERATE_COLUMN,
    LSE_CONFIG_ERROR,
    LSE_SCHEMA_ERROR,
    LSE_IO_ERROR,
    LSE_BUFFER_TOO_SMALL,
    LSE_INTERNAL_ERROR
} lse_status;

typedef enum lse_support {
    LSE_FULL_PLANE = 0,
    LSE_DISK = 1
} lse_support;

/* u(v) = lambda |v|^2 + lambda0 1{v != 0} on the plane or on |v|^2 <= peak_power */
typedef struct lse_penalty {
    double lambda;
    double lambda0;
    lse_support support;
    double peak_power;
} lse_penalty;

typedef struct lse_replica_result {
    double lambda;
    double lambda0;
    double chi;
    double p;
    double lambda_rs;
    double kappa;
    double distortion;
    double eta;
    double papr; /* +inf on the full plane */
    double residual;
    long iterations;
} lse_replica_result;

typedef struct lse_run_options {
    const char* out_dir;
    int threads;
} lse_run_options;

typedef struct lse_config lse_config;
typedef struct lse_system lse_system;

LSE_API const char* lse_version(void);
LSE_API const char* lse_status_name(lse_status status);
/* Message of the last failing call on this thread; "" after success. */
LSE_API const char* lse_last_error(void);

LSE_API lse_status lse_config_create(lse_config** out);
LSE_API lse_status lse_config_parse(const char* text, lse_config** out);
LSE_API lse_status lse_config_load(const char* path, lse_config** out);
LSE_API void lse_config_destroy(lse_config* config);
LSE_API lse_status lse_config_set(lse_config* config, const char* key, const char* value);
/* "section.key=value" */
LSE_API lse_status lse_config_override(lse_config* config, const char* assignment);
/* Copies the value with its terminator into buf. *needed (optional) receives
   the size including the terminator; LSE_BUFFER_TOO_SMALL if it exceeds size,
   LSE_CONFIG_ERROR if the key is unset. */
LSE_API lse_status lse_config_get(const lse_config* config, const char* key, char* buf, size_t size,
                                  size_t* needed);
LSE_API lse_status lse_config_serialize(const lse_config* config, char* buf, size_t size, size_t* needed);

/* mode: replica, sweep, simulate, compare, calibrate, saving or plot */
LSE_API lse_status lse_run(const lse_config* config, const char* mode, const lse_run_options* options);
LSE_API lse_status lse_plot(const char* const* csv_paths, size_t count, const char* title,
                            const char* svg_path);

/* Marchenko-Pastur system at load alpha = k/n. */
LSE_API lse_status lse_system_create(double alpha, double lambda_s, const lse_penalty* penalty,
                                     lse_system** out);
LSE_API void lse_system_destroy(lse_system* system);
LSE_API lse_status lse_system_solve(const lse_system* system, lse_replica_result* out);
/* Fits lambda and lambda0 to the targets and stores them in the system.
   papr <= 0 keeps the current support; papr >= 1 puts the disk at papr * p. */
LSE_API lse_status lse_system_calibrate(lse_system* system, double p, double eta, double papr,
                                        lse_replica_result* out);
LSE_API lse_status lse_system_penalty(const lse_system* system, lse_penalty* out);

LSE_API lse_status lse_prox(const lse_penalty* penalty, double z_re, double z_im, double c, double* out_re,
                            double* out_im);
LSE_API lse_status lse_q_function(double x, double* out);
/* Equal-distortion random-TAS fraction; papr_db NaN means the full plane. */
LSE_API lse_status lse_antenna_saving(double alpha_inverse, double lambda_s, double p, double eta,
                                      double papr_db, double* eta_random);

#ifdef __cplusplus
}
#endif

#endif
