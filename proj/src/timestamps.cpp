#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "fourphoton/errors.hpp"
#include "fourphoton/source_mc.hpp"

namespace fourphoton {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DomainError("truncated timestamp file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void write_record(std::ostream& out, const DetectionRecord& record) {
  const nlohmann::json header = {
      {"format", "fourphoton-timestamps"}, {"version", 1}, {"unit", "ps"}, {"modes", 4},
      {"duration_s", record.duration_s}};
  const std::string h = header.dump();
  put_u64(out, h.size());
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& mode : record.times_ps) {
    put_u64(out, mode.size());
    for (std::int64_t t : mode) put_u64(out, static_cast<std::uint64_t>(t));
  }
}

DetectionRecord read_record(std::istream& in) {
  const std::uint64_t len = get_u64(in);
  if (len > (1u << 20)) throw DomainError("timestamp header too long");
  std::string h(len, '\0');
  if (!in.read(h.data(), static_cast<std::streamsize>(len))) throw DomainError("truncated timestamp header");
  DetectionRecord rec;
  try {
    const auto header = nlohmann::json::parse(h);
    if (header.at("format") != "fourphoton-timestamps" || header.at("modes") != 4)
      throw DomainError("not a four-mode timestamp file");
    rec.duration_s = header.at("duration_s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("bad timestamp header: ") + e.what());
  }
  for (auto& mode : rec.times_ps) {
    const std::uint64_t n = get_u64(in);
    mode.resize(n);
    for (auto& t : mode) t = static_cast<std::int64_t>(get_u64(in));
    if (!std::is_sorted(mode.begin(), mode.end())) throw DomainError("timestamps not sorted");
  }
  return rec;
}

}  // namespace fourphoton
