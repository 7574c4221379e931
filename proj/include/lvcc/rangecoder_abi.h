/*
 * Copyright 2026 The LVCC Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * Flat-buffer boundary for range-coder backends.
 *
 * Any backend (the built-in reference coder, or a native library loaded at
 * runtime) exports these two functions with C linkage. All inputs are
 * contiguous arrays; the only output buffers are caller-owned.
 *
 * Tables are passed back to back:
 *   cdf        all CDF values, each table a strictly increasing run that
 *              starts at 0 and ends at 65536
 *   cdf_start  n_tables + 1 prefix offsets into `cdf`; table t occupies
 *              cdf[cdf_start[t] .. cdf_start[t + 1])
 *   offsets    n_tables minimum symbol values; table t codes symbols
 *              offsets[t] .. offsets[t] + len_t - 2
 *
 * Symbol i is coded with table indices[i]. The byte stream is the
 * carry-propagating range code pinned by tests/data/coder_vectors.bin:
 * 64-bit low, 32-bit range, 16-bit totals, byte-wise renormalisation below
 * 2^24, five flush bytes.
 */

#ifndef LVCC_RANGECODER_ABI_H_
#define LVCC_RANGECODER_ABI_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum lvcc_rc_status {
  LVCC_RC_OK = 0,
  LVCC_RC_SYMBOL_OUT_OF_RANGE = 1,
  LVCC_RC_BUFFER_TOO_SMALL = 2,
  LVCC_RC_STREAM_EXHAUSTED = 3,
  LVCC_RC_INVALID_TABLE = 4,
  LVCC_RC_CORRUPT_STREAM = 5,
  LVCC_RC_BAD_TABLE_INDEX = 6
};

/* Upper bound on the encoded size of `count` symbols. */
uint64_t lvcc_rc_max_encoded_size(uint64_t count);

/* On failure *error_position holds the offending symbol index (or the
 * table index for LVCC_RC_INVALID_TABLE). */
int32_t lvcc_rc_encode(const uint32_t* cdf, const uint64_t* cdf_start,
                       const int32_t* offsets, uint32_t n_tables,
                       const int32_t* symbols, const uint32_t* indices,
                       uint64_t count, uint8_t* out, uint64_t capacity,
                       uint64_t* out_len, uint64_t* error_position);

int32_t lvcc_rc_decode(const uint32_t* cdf, const uint64_t* cdf_start,
                       const int32_t* offsets, uint32_t n_tables,
                       const uint8_t* data, uint64_t len,
                       const uint32_t* indices, uint64_t count,
                       int32_t* symbols_out, uint64_t* error_position);

#ifdef __cplusplus
}
#endif

#endif /* LVCC_RANGECODER_ABI_H_ */
