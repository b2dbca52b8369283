#include "tlkit/nn/params_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "tlkit/error.hpp"

namespace tlkit::nn {

namespace {

constexpr const char* kFormat = "tlkit-cbam";
constexpr int kVersion = 1;

nlohmann::json header_for(const CbamParams& p) {
  const auto k = p.kernel_size;
  return {{"format", kFormat},
          {"version", kVersion},
          {"channels", p.channels},
          {"reduction", p.reduction},
          {"kernel_size", k},
          {"tensors",
           {{{"name", "mlp_w1"}, {"shape", {p.hidden(), p.channels}}},
            {{"name", "mlp_w2"}, {"shape", {p.channels, p.hidden()}}},
            {{"name", "spatial_kernel"}, {"shape", {2, k, k}}}}}};
}

}  // namespace

std::string encode_params(const CbamParams& p) {
  p.validate();
  std::string out = header_for(p).dump();
  out.push_back('\n');
  for (double v : p.flatten()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  return out;
}

CbamParams decode_params(const std::string& blob) {
  const auto nl = blob.find('\n');
  if (nl == std::string::npos) throw FormatError("params: missing header line");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(blob.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("params: bad header: ") + e.what());
  }
  CbamParams p;
  try {
    if (h.at("format") != kFormat || h.at("version") != kVersion) throw FormatError("params: unsupported format");
    p = CbamParams::zeros(h.at("channels").get<std::size_t>(), h.at("reduction").get<std::size_t>(),
                          h.at("kernel_size").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("params: bad header: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("params: ") + e.what());
  }
  if (h.value("tensors", nlohmann::json()) != header_for(p)["tensors"]) {
    throw FormatError("params: tensor table does not match the declared dimensions");
  }
  const std::size_t count = p.parameter_count();
  if (blob.size() - nl - 1 != count * 8) {
    throw FormatError("params: expected " + std::to_string(count * 8) + " payload bytes, got " +
                      std::to_string(blob.size() - nl - 1));
  }
  std::vector<double> flat(count);
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data() + nl + 1);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[i * 8 + static_cast<std::size_t>(b)]} << (8 * b);
    flat[i] = std::bit_cast<double>(bits);
  }
  return p.with_values(flat);
}

void save_params(const std::filesystem::path& file, const CbamParams& p) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw FormatError("cannot write " + file.string());
  const std::string blob = encode_params(p);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

CbamParams load_params(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open " + file.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_params(blob);
}

}  // namespace tlkit::nn
