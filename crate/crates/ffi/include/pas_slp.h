#ifndef PAS_SLP_H
#define PAS_SLP_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PasStatus {
  PAS_STATUS_OK = 0,
  PAS_STATUS_NULL_POINTER = 1,
  PAS_STATUS_INVALID_ARGUMENT = 2,
  PAS_STATUS_INFEASIBLE_GEOMETRY = 3,
  PAS_STATUS_INFEASIBLE = 4,
  PAS_STATUS_ILL_CONDITIONED = 5,
  PAS_STATUS_BUFFER_TOO_SMALL = 6,
  PAS_STATUS_CONFIG = 7,
  PAS_STATUS_IO = 8,
  PAS_STATUS_PANIC = 99,
} PasStatus;

/**
 * Opaque scenario: geometry, carrier and the transmitted symbols.
 */
typedef struct PasScenario PasScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *pas_last_error(void);

/**
 * Creates a scenario with waveguides spread evenly over the square.
 *
 * `users_xy` holds `num_users` (x, y) pairs. `symbol_indices` holds one
 * constellation index per user for `psk_order`-PSK. A non-positive
 * `min_spacing` selects half a free-space wavelength.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum PasStatus pas_scenario_new(const double *users_xy,
                                size_t num_users,
                                const uint32_t *symbol_indices,
                                uint32_t psk_order,
                                size_t num_waveguides,
                                size_t pas_per_waveguide,
                                double region_side,
                                double height,
                                double waveguide_length,
                                double min_spacing,
                                double carrier_freq_hz,
                                double n_eff,
                                struct PasScenario **out);

/**
 * Releases a scenario. Null is ignored.
 *
 * # Safety
 * `scenario` must come from [`pas_scenario_new`] and not be used afterwards.
 */
void pas_scenario_free(struct PasScenario *scenario);

/**
 * Caps the number of alternating iterations used by [`pas_ao_solve`].
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum PasStatus pas_scenario_set_max_iters(struct PasScenario *scenario, uint32_t max_iters);

/**
 * Writes the evenly spaced starting placement (row-major, `N*L` values).
 *
 * # Safety
 * `scenario` must be a live handle and `out` valid for `out_len` doubles.
 */
enum PasStatus pas_fixed_placement(const struct PasScenario *scenario, double *out, size_t out_len);

/**
 * Minimum-power precoder at a fixed placement.
 *
 * `gamma_db` holds one SINR target per user. On success `power_w` receives
 * the transmit power and, when `beam_out` is not null, the `N x K` beam
 * matrix is written column-major as interleaved (re, im) pairs, `2*N*K`
 * doubles.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum PasStatus pas_solve_at(const struct PasScenario *scenario,
                            const double *placement,
                            size_t placement_len,
                            const double *gamma_db,
                            double noise_dbm,
                            double *power_w,
                            double *beam_out,
                            size_t beam_len);

/**
 * Joint precoder and placement optimization started from the evenly spaced
 * placement. Writes the final placement (`N*L` values), its power, the
 * number of iterations and whether the relative tolerance was reached.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum PasStatus pas_ao_solve(const struct PasScenario *scenario,
                            const double *gamma_db,
                            double noise_dbm,
                            double *placement_out,
                            size_t placement_len,
                            double *power_w,
                            uint32_t *iterations,
                            bool *converged);

/**
 * Runs a named experiment from a JSON config and writes its CSV records.
 * `config_json` may be null for the defaults.
 *
 * # Safety
 * String arguments must be null-terminated.
 */
enum PasStatus pas_run_experiment(const char *config_json,
                                  const char *experiment,
                                  const char *csv_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PAS_SLP_H */
