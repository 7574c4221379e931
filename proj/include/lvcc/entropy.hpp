// Copyright 2026 The LVCC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LVCC_ENTROPY_HPP_
#define LVCC_ENTROPY_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lvcc::entropy {

inline constexpr int kPrecisionBits = 16;
inline constexpr uint32_t kTotalMass = uint32_t{1} << kPrecisionBits;
inline constexpr double kTailMass = 1e-9;

// Quantized cumulative distribution. cdf[0] == 0, cdf.back() == 65536,
// strictly increasing; slot k codes the symbol value offset + k.
struct CdfTable {
  std::vector<uint32_t> cdf;
  int32_t offset = 0;

  int32_t min_symbol() const { return offset; }
  int32_t max_symbol() const {
    return offset + static_cast<int32_t>(cdf.size()) - 2;
  }
  size_t symbol_count() const { return cdf.size() - 1; }
  uint32_t frequency(int32_t symbol) const {
    const auto k = static_cast<size_t>(symbol - offset);
    return cdf[k + 1] - cdf[k];
  }
  // Throws Error if the invariants above do not hold.
  void validate() const;
};

// Quantizes a probability mass function (any nonnegative weights, not all
// zero) to a table where every symbol keeps at least one count.
CdfTable quantize_pmf(std::span<const double> pmf, int32_t offset);

// Streaming carry-propagating range encoder.
class RangeEncoder {
 public:
  // Throws EncodeError if the symbol is outside the table's support.
  void encode(int32_t symbol, const CdfTable& table);
  // Codes the interval [start, start + frequency) out of 65536. No checks.
  void encode_interval(uint32_t start, uint32_t frequency);
  // Flushes and returns the stream; the encoder is left empty.
  std::vector<uint8_t> finish();

 private:
  void shift_low();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  // Throws DecodeError if the stream is shorter than the 5-byte preamble.
  explicit RangeDecoder(std::span<const uint8_t> data);
  // Throws DecodeError on an exhausted or inconsistent stream.
  int32_t decode(const CdfTable& table);

  // Low-level pair behind decode(): the cumulative count the next symbol
  // falls in, then removal of that symbol's interval.
  uint32_t target();
  void consume(uint32_t start, uint32_t frequency);

  size_t consumed() const { return pos_; }

 private:
  uint8_t next_byte();

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

// Batch reference coder. indices[i] selects the table for symbols[i].
std::vector<uint8_t> entropy_encode(std::span<const int32_t> symbols,
                                    std::span<const CdfTable> tables,
                                    std::span<const uint32_t> indices);
std::vector<int32_t> entropy_decode(std::span<const uint8_t> bytes,
                                    std::span<const CdfTable> tables,
                                    std::span<const uint32_t> indices,
                                    size_t count);

// ---------------------------------------------------------------------------
// Latent tables with escape.
//
// A latent table codes values in [min_symbol, max_symbol - 1]; its top slot
// is an escape marker carrying the folded tail mass. A value outside that
// range is coded as the escape, followed by its distance from the range
// through a uniform 4-bit bypass table.

// Gaussian N(0, scale) discretized on integers, support +-ceil(scale * z)
// where z bounds the two-sided tail mass kTailMass.
CdfTable gaussian_latent_table(double scale);
// Arbitrary continuous CDF discretized on integers over the kTailMass
// quantile range (capped at `max_support` symbols).
CdfTable cdf_latent_table(const std::function<double(double)>& cdf,
                          size_t max_support = 4095);
const CdfTable& bypass_table();

// Appends the coder-level symbols (and table ids) for one latent value.
// `bypass_index` is the table id the bypass table has in the caller's list.
void expand_latent(int32_t value, const CdfTable& table, uint32_t table_index,
                   uint32_t bypass_index, std::vector<int32_t>& symbols,
                   std::vector<uint32_t>& indices);
int32_t decode_latent(RangeDecoder& decoder, const CdfTable& table);

// ---------------------------------------------------------------------------
// Backends implementing the flat-buffer boundary in rangecoder_abi.h.

class CoderBackend {
 public:
  virtual ~CoderBackend() = default;
  virtual std::string name() const = 0;
  virtual std::vector<uint8_t> encode(std::span<const int32_t> symbols,
                                      std::span<const CdfTable> tables,
                                      std::span<const uint32_t> indices) const = 0;
  virtual std::vector<int32_t> decode(std::span<const uint8_t> bytes,
                                      std::span<const CdfTable> tables,
                                      std::span<const uint32_t> indices,
                                      size_t count) const = 0;
};

// The built-in coder, called through the same C entry points a native
// backend exports.
const CoderBackend& reference_backend();

// Loads a shared library exporting lvcc_rc_encode / lvcc_rc_decode.
// Throws ConfigError if the library or its symbols are missing.
std::unique_ptr<CoderBackend> load_native_backend(const std::string& path);

// Backend named by the LVCC_RANGECODER_LIB environment variable, or the
// reference backend when it is unset.
const CoderBackend& default_backend();

}  // namespace lvcc::entropy

#endif  // LVCC_ENTROPY_HPP_
