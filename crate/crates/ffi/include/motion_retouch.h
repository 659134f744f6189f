#ifndef MOTION_RETOUCH_H
#define MOTION_RETOUCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum MrStatus {
  MR_STATUS_OK = 0,
  MR_STATUS_NULL_POINTER = 1,
  MR_STATUS_INVALID_ARGUMENT = 2,
  MR_STATUS_TAPE = 3,
  MR_STATUS_PARSE = 4,
  MR_STATUS_CONFIG = 5,
  MR_STATUS_IO = 6,
  MR_STATUS_NON_FINITE = 7,
  MR_STATUS_DIVERGED = 8,
  MR_STATUS_PANIC = 9,
} MrStatus;

// Opaque scenario handle.
typedef struct MrScenario MrScenario;

// Opaque tape handle.
typedef struct MrTape MrTape;

// Task outcome of a run. `failure` is 0 on success, otherwise 1 missed
// grasp, 2 dropped, 3 insertion failed, 4 inserted at an angle.
typedef struct MrOutcome {
  bool success;
  int32_t failure;
  bool grasped;
  double final_depth;
  double max_lateral_force;
} MrOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread; empty if none. The
// pointer stays valid until the next failing call on this thread.
const char *mr_last_error_message(void);

// Library version, a static NUL-terminated string.
const char *mr_version(void);

// Built-in tube-transfer scenario.
enum MrStatus mr_scenario_default(struct MrScenario **out_scenario);

// Scenario parsed from TOML text.
enum MrStatus mr_scenario_from_toml(const char *toml, struct MrScenario **out_scenario);

// Scenario loaded from a TOML file.
enum MrStatus mr_scenario_load(const char *path, struct MrScenario **out_scenario);

void mr_scenario_free(struct MrScenario *scenario);

// Bilateral teaching run. Writes the recorded tape and the follower outcome.
// `out_outcome` may be null.
enum MrStatus mr_teach(const struct MrScenario *scenario,
                       struct MrTape **out_tape,
                       struct MrOutcome *out_outcome);

// Motion-copying playback of `tape` with sensor-noise seed `seed`.
enum MrStatus mr_copy(const struct MrTape *tape,
                      const struct MrScenario *scenario,
                      uint64_t seed,
                      struct MrOutcome *out_outcome);

// Scripted retouch of `tape`. `profile_path` names an intervention profile
// file; null means no intervention. `out_outcome` may be null.
enum MrStatus mr_retouch(const struct MrTape *tape,
                         const struct MrScenario *scenario,
                         const char *profile_path,
                         struct MrTape **out_tape,
                         struct MrOutcome *out_outcome);

enum MrStatus mr_tape_load(const char *path, struct MrTape **out_tape);

enum MrStatus mr_tape_save(const struct MrTape *tape, const char *path);

// Number of samples in `tape`.
enum MrStatus mr_tape_len(const struct MrTape *tape, size_t *out_len);

// New tape playing `tape` `factor` times faster.
enum MrStatus mr_tape_speed_up(const struct MrTape *tape,
                               uint32_t factor,
                               struct MrTape **out_tape);

// Copies the commanded angles of sample `index` into `out_q[0..8]`.
enum MrStatus mr_tape_angles(const struct MrTape *tape, size_t index, double *out_q);

void mr_tape_free(struct MrTape *tape);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOTION_RETOUCH_H */
