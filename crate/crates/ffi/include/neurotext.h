/* C interface to the neurotext toolkit.
 *
 * Every function returns an int status code (except the accessors and the
 * string getters): NT_OK on success, otherwise one of the NT_ERR_* codes.
 * After a failure, nt_last_error() returns a thread-local message that
 * stays valid until the next failing call on the same thread. Output
 * pointers are written only on success.
 */

#ifndef NEUROTEXT_H
#define NEUROTEXT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define NT_OK 0
#define NT_ERR_NULL_ARGUMENT 1
#define NT_ERR_INVALID_UTF8 2
#define NT_ERR_RUNTIME 3
/* The command ran but some items failed; details in nt_last_error(). */
#define NT_ERR_PARTIAL 4

/* Opaque multichannel recording handle. */
typedef struct NtRecording NtRecording;

/* Message for the most recent failure on this thread. */
const char *nt_last_error(void);

/* Static library version string. */
const char *nt_version(void);

/* Builds a recording from row-major channels x time_samples doubles. */
int nt_recording_new(const double *samples,
                     size_t channels,
                     size_t time_samples,
                     double rate_hz,
                     NtRecording **out);

/* Frees a handle; null is a no-op. */
void nt_recording_free(NtRecording *rec);

size_t nt_recording_channels(const NtRecording *rec);
size_t nt_recording_time_samples(const NtRecording *rec);
double nt_recording_rate_hz(const NtRecording *rec);

/* Copies the samples out, row-major channels x time_samples; the buffer
 * must have room for channels * time_samples doubles. */
int nt_recording_copy_data(const NtRecording *rec, double *out);

/* Reads / writes the .ntr recording file format. */
int nt_recording_read(const char *path, NtRecording **out);
int nt_recording_write(const NtRecording *rec, const char *path);

/* Runs the preprocessing chain (power-line notch, band-pass, resample,
 * robust scale, clip). json_config is a JSON object of parameter
 * overrides; "{}" selects the defaults. */
int nt_preprocess(const NtRecording *rec,
                  const char *json_config,
                  NtRecording **out);

/* Text metrics over `count` paired NUL-terminated sentences.
 * nt_bleu_n writes corpus BLEU-`order` in percent. */
int nt_bleu_n(const char *const *references,
              const char *const *hypotheses,
              size_t count,
              size_t order,
              double *out);

int nt_wer(const char *const *references,
           const char *const *hypotheses,
           size_t count,
           double *out);

/* ROUGE-1; any of out_f / out_p / out_r may be NULL to skip it. */
int nt_rouge1(const char *const *references,
              const char *const *hypotheses,
              size_t count,
              double *out_f,
              double *out_p,
              double *out_r);

/* Runs one pipeline command against a TOML experiment config file.
 * Commands: "toy_gen", "preprocess", "split", "train", "evaluate".
 * Returns NT_ERR_PARTIAL when the command finished but some items
 * failed. */
int nt_run_command(const char *config_path, const char *command);

#ifdef __cplusplus
}
#endif

#endif /* NEUROTEXT_H */
