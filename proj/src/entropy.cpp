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

#include "lvcc/entropy.hpp"

#include <dlfcn.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "lvcc/errors.hpp"
#include "lvcc/rangecoder_abi.h"

namespace lvcc::entropy {

namespace {

constexpr uint32_t kTopValue = uint32_t{1} << 24;
constexpr int kBypassBits = 4;
constexpr int32_t kBypassMax = (1 << kBypassBits) - 1;

// Non-owning view of one table inside the flat-buffer layout.
struct TableView {
  const uint32_t* cdf;
  size_t length;
  int32_t offset;

  bool contains(int32_t symbol) const {
    return symbol >= offset &&
           static_cast<int64_t>(symbol) - offset + 2 <=
               static_cast<int64_t>(length);
  }
};

bool valid_table(const uint32_t* cdf, size_t length) {
  if (length < 2 || cdf[0] != 0 || cdf[length - 1] != kTotalMass) return false;
  for (size_t i = 1; i < length; ++i) {
    if (cdf[i] <= cdf[i - 1]) return false;
  }
  return true;
}

// Upper tail of the standard normal, Q(x) = 1 - Phi(x).
double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double two_sided_tail_bound(double tail) {
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (2.0 * normal_upper_tail(mid) > tail) lo = mid; else hi = mid;
  }
  return hi;
}

double quantile(const std::function<double(double)>& cdf, double p) {
  double lo = -1.0, hi = 1.0;
  while (cdf(lo) > p && lo > -1e7) lo *= 2.0;
  while (cdf(hi) < p && hi < 1e7) hi *= 2.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < p) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct FlatTables {
  std::vector<uint32_t> cdf;
  std::vector<uint64_t> start{0};
  std::vector<int32_t> offsets;

  explicit FlatTables(std::span<const CdfTable> tables) {
    for (const auto& t : tables) {
      cdf.insert(cdf.end(), t.cdf.begin(), t.cdf.end());
      start.push_back(cdf.size());
      offsets.push_back(t.offset);
    }
  }
  uint32_t count() const { return static_cast<uint32_t>(offsets.size()); }
};

using EncodeFn = decltype(&lvcc_rc_encode);
using DecodeFn = decltype(&lvcc_rc_decode);
using MaxSizeFn = decltype(&lvcc_rc_max_encoded_size);

std::string status_text(int32_t status) {
  switch (status) {
    case LVCC_RC_SYMBOL_OUT_OF_RANGE: return "symbol outside table support";
    case LVCC_RC_BUFFER_TOO_SMALL: return "output buffer too small";
    case LVCC_RC_STREAM_EXHAUSTED: return "stream exhausted";
    case LVCC_RC_INVALID_TABLE: return "invalid cdf table";
    case LVCC_RC_CORRUPT_STREAM: return "corrupt stream";
    case LVCC_RC_BAD_TABLE_INDEX: return "table index out of range";
    default: return "status " + std::to_string(status);
  }
}

// Calls a backend through the C boundary and maps status codes to errors.
class AbiBackend : public CoderBackend {
 public:
  AbiBackend(std::string name, EncodeFn enc, DecodeFn dec, MaxSizeFn max_size)
      : name_(std::move(name)), enc_(enc), dec_(dec), max_size_(max_size) {}

  std::string name() const override { return name_; }

  std::vector<uint8_t> encode(std::span<const int32_t> symbols,
                              std::span<const CdfTable> tables,
                              std::span<const uint32_t> indices) const override {
    if (symbols.size() != indices.size()) {
      throw EncodeError("symbol and index counts differ");
    }
    FlatTables flat(tables);
    std::vector<uint8_t> out(max_size_(symbols.size()));
    uint64_t len = 0, where = 0;
    const int32_t status =
        enc_(flat.cdf.data(), flat.start.data(), flat.offsets.data(),
             flat.count(), symbols.data(), indices.data(), symbols.size(),
             out.data(), out.size(), &len, &where);
    if (status != LVCC_RC_OK) {
      throw EncodeError(status_text(status) + " at position " +
                        std::to_string(where));
    }
    out.resize(len);
    return out;
  }

  std::vector<int32_t> decode(std::span<const uint8_t> bytes,
                              std::span<const CdfTable> tables,
                              std::span<const uint32_t> indices,
                              size_t count) const override {
    if (indices.size() != count) throw DecodeError("index count differs from symbol count");
    FlatTables flat(tables);
    std::vector<int32_t> symbols(count);
    uint64_t where = 0;
    const int32_t status =
        dec_(flat.cdf.data(), flat.start.data(), flat.offsets.data(),
             flat.count(), bytes.data(), bytes.size(), indices.data(), count,
             symbols.data(), &where);
    if (status != LVCC_RC_OK) {
      throw DecodeError(status_text(status) + " at symbol " +
                        std::to_string(where));
    }
    return symbols;
  }

 private:
  std::string name_;
  EncodeFn enc_;
  DecodeFn dec_;
  MaxSizeFn max_size_;
};

class NativeBackend final : public AbiBackend {
 public:
  NativeBackend(std::string path, void* handle, EncodeFn enc, DecodeFn dec,
                MaxSizeFn max_size)
      : AbiBackend("native:" + path, enc, dec, max_size), handle_(handle) {}
  ~NativeBackend() override { dlclose(handle_); }

 private:
  void* handle_;
};

}  // namespace

void CdfTable::validate() const {
  if (!valid_table(cdf.data(), cdf.size())) {
    throw Error("internal error: cdf table is not strictly increasing from 0 to 65536");
  }
}

CdfTable quantize_pmf(std::span<const double> pmf, int32_t offset) {
  const size_t n = pmf.size();
  if (n == 0 || n > kTotalMass) {
    throw Error("pmf must have between 1 and 65536 entries");
  }
  double sum = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw NumericError("pmf entry is negative or non-finite");
    sum += p;
  }
  if (sum <= 0.0) throw NumericError("pmf has zero total mass");

  // Every symbol gets one count; the rest is shared in proportion to mass,
  // with the rounding remainder going to the largest fractional parts.
  const double spare = static_cast<double>(kTotalMass - n);
  std::vector<uint32_t> counts(n);
  std::vector<double> fraction(n);
  uint64_t assigned = 0;
  for (size_t i = 0; i < n; ++i) {
    const double share = pmf[i] / sum * spare;
    const double whole = std::floor(share);
    counts[i] = 1 + static_cast<uint32_t>(whole);
    fraction[i] = share - whole;
    assigned += counts[i];
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return fraction[a] > fraction[b];
  });
  // Floating error can overshoot by a count or two; take it back from the
  // largest bins.
  while (assigned > kTotalMass) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  for (size_t k = 0; assigned < kTotalMass; k = (k + 1) % n) {
    ++counts[order[k]];
    ++assigned;
  }

  CdfTable table;
  table.offset = offset;
  table.cdf.resize(n + 1);
  table.cdf[0] = 0;
  for (size_t i = 0; i < n; ++i) table.cdf[i + 1] = table.cdf[i] + counts[i];
  table.validate();
  return table;
}

// ---------------------------------------------------------------------------

void RangeEncoder::encode(int32_t symbol, const CdfTable& table) {
  if (symbol < table.min_symbol() || symbol > table.max_symbol()) {
    throw EncodeError("symbol " + std::to_string(symbol) +
                      " outside table support [" +
                      std::to_string(table.min_symbol()) + ", " +
                      std::to_string(table.max_symbol()) + "]");
  }
  const auto k = static_cast<size_t>(symbol - table.offset);
  encode_interval(table.cdf[k], table.cdf[k + 1] - table.cdf[k]);
}

void RangeEncoder::encode_interval(uint32_t start, uint32_t frequency) {
  const uint32_t r = range_ >> kPrecisionBits;
  low_ += uint64_t{r} * start;
  range_ = r * frequency;
  while (range_ < kTopValue) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t pending = cache_;
    do {
      out_.push_back(static_cast<uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  std::vector<uint8_t> out = std::move(out_);
  *this = RangeEncoder();
  return out;
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> data) : data_(data) {
  if (data.size() < 5) throw DecodeError("stream shorter than coder preamble");
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ >= data_.size()) throw DecodeError("stream exhausted");
  return data_[pos_++];
}

uint32_t RangeDecoder::target() {
  const uint32_t r = range_ >> kPrecisionBits;
  const uint32_t value = code_ / r;
  if (value >= kTotalMass) throw DecodeError("corrupt stream");
  return value;
}

void RangeDecoder::consume(uint32_t start, uint32_t frequency) {
  const uint32_t r = range_ >> kPrecisionBits;
  code_ -= r * start;
  range_ = r * frequency;
  while (range_ < kTopValue) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

int32_t RangeDecoder::decode(const CdfTable& table) {
  const uint32_t value = target();
  auto it = std::upper_bound(table.cdf.begin(), table.cdf.end(), value);
  const auto k = static_cast<size_t>(it - table.cdf.begin()) - 1;
  if (k + 1 >= table.cdf.size()) throw DecodeError("corrupt stream");
  consume(table.cdf[k], table.cdf[k + 1] - table.cdf[k]);
  return table.offset + static_cast<int32_t>(k);
}

std::vector<uint8_t> entropy_encode(std::span<const int32_t> symbols,
                                    std::span<const CdfTable> tables,
                                    std::span<const uint32_t> indices) {
  return reference_backend().encode(symbols, tables, indices);
}

std::vector<int32_t> entropy_decode(std::span<const uint8_t> bytes,
                                    std::span<const CdfTable> tables,
                                    std::span<const uint32_t> indices,
                                    size_t count) {
  return reference_backend().decode(bytes, tables, indices, count);
}

// ---------------------------------------------------------------------------

CdfTable gaussian_latent_table(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw NumericError("gaussian scale must be positive");
  static const double z = two_sided_tail_bound(kTailMass);
  const auto hi = std::max<int32_t>(1, static_cast<int32_t>(std::ceil(scale * z)));
  std::vector<double> pmf;
  pmf.reserve(static_cast<size_t>(2 * hi + 2));
  for (int32_t k = -hi; k <= hi; ++k) {
    const double a = std::abs(k);
    // Mass of [|k| - 0.5, |k| + 0.5] from the upper tail, which keeps
    // precision far from the mode.
    const double mass = a == 0.0
                            ? 1.0 - 2.0 * normal_upper_tail(0.5 / scale)
                            : normal_upper_tail((a - 0.5) / scale) -
                                  normal_upper_tail((a + 0.5) / scale);
    pmf.push_back(std::max(mass, 0.0));
  }
  pmf.push_back(2.0 * normal_upper_tail((hi + 0.5) / scale));
  return quantize_pmf(pmf, -hi);
}

CdfTable cdf_latent_table(const std::function<double(double)>& cdf,
                          size_t max_support) {
  auto lo = static_cast<int64_t>(std::floor(quantile(cdf, kTailMass / 2)));
  auto hi = static_cast<int64_t>(std::ceil(quantile(cdf, 1.0 - kTailMass / 2)));
  if (hi < lo) std::swap(lo, hi);
  if (static_cast<size_t>(hi - lo + 1) > max_support) {
    const auto median = static_cast<int64_t>(std::llround(quantile(cdf, 0.5)));
    lo = median - static_cast<int64_t>(max_support / 2);
    hi = lo + static_cast<int64_t>(max_support) - 1;
  }
  std::vector<double> pmf;
  pmf.reserve(static_cast<size_t>(hi - lo + 2));
  for (int64_t k = lo; k <= hi; ++k) {
    pmf.push_back(std::max(cdf(k + 0.5) - cdf(k - 0.5), 0.0));
  }
  pmf.push_back(std::max(cdf(lo - 0.5) + (1.0 - cdf(hi + 0.5)), 0.0));
  return quantize_pmf(pmf, static_cast<int32_t>(lo));
}

const CdfTable& bypass_table() {
  static const CdfTable table = [] {
    std::vector<double> uniform(kBypassMax + 1, 1.0);
    return quantize_pmf(uniform, 0);
  }();
  return table;
}

void expand_latent(int32_t value, const CdfTable& table, uint32_t table_index,
                   uint32_t bypass_index, std::vector<int32_t>& symbols,
                   std::vector<uint32_t>& indices) {
  const int32_t lo = table.min_symbol();
  const int32_t escape = table.max_symbol();
  const int32_t hi = escape - 1;
  auto push = [&](int32_t s, uint32_t t) {
    symbols.push_back(s);
    indices.push_back(t);
  };
  if (value >= lo && value <= hi) {
    push(value, table_index);
    return;
  }
  push(escape, table_index);
  const bool above = value > hi;
  const uint64_t distance = above ? static_cast<uint64_t>(int64_t{value} - hi)
                                  : static_cast<uint64_t>(int64_t{lo} - value);
  const uint64_t raw = 2 * (distance - 1) + (above ? 1 : 0);
  int32_t nibbles = 0;
  while (nibbles < 16 && (raw >> (kBypassBits * nibbles)) != 0) ++nibbles;
  for (int32_t n = nibbles; ; n -= kBypassMax) {
    push(std::min(n, kBypassMax), bypass_index);
    if (n < kBypassMax) break;
  }
  for (int32_t j = 0; j < nibbles; ++j) {
    push(static_cast<int32_t>((raw >> (kBypassBits * j)) & kBypassMax),
         bypass_index);
  }
}

int32_t decode_latent(RangeDecoder& decoder, const CdfTable& table) {
  const int32_t symbol = decoder.decode(table);
  const int32_t escape = table.max_symbol();
  if (symbol != escape) return symbol;
  int32_t nibbles = 0;
  for (;;) {
    const int32_t n = decoder.decode(bypass_table());
    nibbles += n;
    if (nibbles > 16) throw DecodeError("escape length too large");
    if (n < kBypassMax) break;
  }
  uint64_t raw = 0;
  for (int32_t j = 0; j < nibbles; ++j) {
    raw |= static_cast<uint64_t>(decoder.decode(bypass_table()))
           << (kBypassBits * j);
  }
  const bool above = (raw & 1) != 0;
  const uint64_t distance = raw / 2 + 1;
  const int64_t value = above ? int64_t{escape - 1} + static_cast<int64_t>(distance)
                              : int64_t{table.min_symbol()} - static_cast<int64_t>(distance);
  if (distance > (uint64_t{1} << 32) || value < INT32_MIN || value > INT32_MAX) {
    throw DecodeError("escaped value out of range");
  }
  return static_cast<int32_t>(value);
}

// ---------------------------------------------------------------------------

const CoderBackend& reference_backend() {
  static const AbiBackend backend("reference", &lvcc_rc_encode,
                                  &lvcc_rc_decode, &lvcc_rc_max_encoded_size);
  return backend;
}

std::unique_ptr<CoderBackend> load_native_backend(const std::string& path) {
  void* handle = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (handle == nullptr) {
    throw ConfigError("cannot load range coder library " + path + ": " + dlerror());
  }
  auto enc = reinterpret_cast<EncodeFn>(dlsym(handle, "lvcc_rc_encode"));
  auto dec = reinterpret_cast<DecodeFn>(dlsym(handle, "lvcc_rc_decode"));
  auto max_size = reinterpret_cast<MaxSizeFn>(dlsym(handle, "lvcc_rc_max_encoded_size"));
  if (enc == nullptr || dec == nullptr || max_size == nullptr) {
    dlclose(handle);
    throw ConfigError("range coder library " + path + " lacks the lvcc_rc_* entry points");
  }
  return std::make_unique<NativeBackend>(path, handle, enc, dec, max_size);
}

const CoderBackend& default_backend() {
  static const std::unique_ptr<CoderBackend> native = []() -> std::unique_ptr<CoderBackend> {
    const char* path = std::getenv("LVCC_RANGECODER_LIB");
    if (path == nullptr || *path == '\0') return nullptr;
    return load_native_backend(path);
  }();
  return native ? *native : reference_backend();
}

}  // namespace lvcc::entropy

// ---------------------------------------------------------------------------
// C boundary of the reference coder.

namespace {

using lvcc::entropy::RangeDecoder;
using lvcc::entropy::RangeEncoder;

bool gather_tables(const uint32_t* cdf, const uint64_t* cdf_start,
                   const int32_t* offsets, uint32_t n_tables,
                   std::vector<lvcc::entropy::TableView>& views,
                   uint64_t* bad) {
  views.clear();
  views.reserve(n_tables);
  for (uint32_t t = 0; t < n_tables; ++t) {
    if (cdf_start[t + 1] < cdf_start[t]) {
      *bad = t;
      return false;
    }
    const lvcc::entropy::TableView view{cdf + cdf_start[t],
                                        cdf_start[t + 1] - cdf_start[t],
                                        offsets[t]};
    if (!lvcc::entropy::valid_table(view.cdf, view.length)) {
      *bad = t;
      return false;
    }
    views.push_back(view);
  }
  return true;
}

}  // namespace

extern "C" uint64_t lvcc_rc_max_encoded_size(uint64_t count) {
  return 2 * count + 16;
}

extern "C" int32_t lvcc_rc_encode(const uint32_t* cdf, const uint64_t* cdf_start,
                                  const int32_t* offsets, uint32_t n_tables,
                                  const int32_t* symbols, const uint32_t* indices,
                                  uint64_t count, uint8_t* out, uint64_t capacity,
                                  uint64_t* out_len, uint64_t* error_position) {
  uint64_t scratch = 0;
  if (error_position == nullptr) error_position = &scratch;
  std::vector<lvcc::entropy::TableView> tables;
  if (!gather_tables(cdf, cdf_start, offsets, n_tables, tables, error_position)) {
    return LVCC_RC_INVALID_TABLE;
  }
  RangeEncoder encoder;
  for (uint64_t i = 0; i < count; ++i) {
    if (indices[i] >= n_tables) {
      *error_position = i;
      return LVCC_RC_BAD_TABLE_INDEX;
    }
    const auto& t = tables[indices[i]];
    if (!t.contains(symbols[i])) {
      *error_position = i;
      return LVCC_RC_SYMBOL_OUT_OF_RANGE;
    }
    const auto k = static_cast<size_t>(symbols[i] - t.offset);
    encoder.encode_interval(t.cdf[k], t.cdf[k + 1] - t.cdf[k]);
  }
  const auto bytes = encoder.finish();
  *out_len = bytes.size();
  if (bytes.size() > capacity) return LVCC_RC_BUFFER_TOO_SMALL;
  std::copy(bytes.begin(), bytes.end(), out);
  return LVCC_RC_OK;
}

extern "C" int32_t lvcc_rc_decode(const uint32_t* cdf, const uint64_t* cdf_start,
                                  const int32_t* offsets, uint32_t n_tables,
                                  const uint8_t* data, uint64_t len,
                                  const uint32_t* indices, uint64_t count,
                                  int32_t* symbols_out, uint64_t* error_position) {
  uint64_t scratch = 0;
  if (error_position == nullptr) error_position = &scratch;
  std::vector<lvcc::entropy::TableView> tables;
  if (!gather_tables(cdf, cdf_start, offsets, n_tables, tables, error_position)) {
    return LVCC_RC_INVALID_TABLE;
  }
  uint64_t i = 0;
  try {
    RangeDecoder decoder(std::span<const uint8_t>(data, len));
    for (; i < count; ++i) {
      if (indices[i] >= n_tables) {
        *error_position = i;
        return LVCC_RC_BAD_TABLE_INDEX;
      }
      const auto& t = tables[indices[i]];
      const uint32_t value = decoder.target();
      const uint32_t* end = t.cdf + t.length;
      const auto k = static_cast<size_t>(std::upper_bound(t.cdf, end, value) - t.cdf) - 1;
      if (k + 1 >= t.length) {
        *error_position = i;
        return LVCC_RC_CORRUPT_STREAM;
      }
      decoder.consume(t.cdf[k], t.cdf[k + 1] - t.cdf[k]);
      symbols_out[i] = t.offset + static_cast<int32_t>(k);
    }
  } catch (const lvcc::DecodeError& e) {
    *error_position = i;
    return std::string(e.what()).find("corrupt") != std::string::npos
               ? LVCC_RC_CORRUPT_STREAM
               : LVCC_RC_STREAM_EXHAUSTED;
  }
  return LVCC_RC_OK;
}
