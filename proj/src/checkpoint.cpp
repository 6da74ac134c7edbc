#include <cmath>
#include <fstream>
#include <json.hpp>
#include <span>
#include <sstream>

#include "gnce/binary_io.hpp"
#include "gnce/error.hpp"
#include "gnce/model.hpp"

namespace gnce {

namespace {

constexpr std::string_view kMagic = "GNCEMDL1";
constexpr int kFormatVersion = 1;

void write_tensor(std::ostream& out, const std::string& name, std::size_t rows, std::size_t cols,
                  std::span<const double> data) {
  binio::write_string(out, name);
  binio::write_le<std::uint64_t>(out, rows);
  binio::write_le<std::uint64_t>(out, cols);
  for (double x : data) binio::write_le<double>(out, x);
}

Tensor read_tensor(std::istream& in) {
  Tensor t;
  t.name = binio::read_string(in, 1 << 12);
  t.rows = binio::read_le<std::uint64_t>(in);
  t.cols = binio::read_le<std::uint64_t>(in);
  if (t.rows > (1u << 24) || t.cols > (1u << 24) || t.rows * t.cols > (1u << 28))
    throw DataError("checkpoint: tensor '" + t.name + "' has implausible shape");
  t.data.resize(t.rows * t.cols);
  for (auto& x : t.data) {
    x = binio::read_le<double>(in);
    if (!std::isfinite(x)) throw DataError("checkpoint: tensor '" + t.name + "' contains a non-finite value");
  }
  return t;
}

}  // namespace

void GnceModel::write(std::ostream& out) const {
  nlohmann::ordered_json header;
  header["format_version"] = kFormatVersion;
  header["config"] = {{"D", config_.D},
                      {"H", config_.H},
                      {"message", std::string(message_fn_name(config_.message))},
                      {"epsilon", config_.epsilon},
                      {"seed", config_.seed},
                      {"featurization", std::string(feature_mode_name(config_.featurization))},
                      {"occ_scale", std::string(occ_scale_name(config_.occ_scale))}};
  header["adam_step"] = adam.step;
  nlohmann::ordered_json shapes = nlohmann::ordered_json::object();
  for (const auto& t : params_) shapes[t.name] = {t.rows, t.cols};
  header["shapes"] = shapes;
  const std::string text = header.dump();

  binio::write_bytes(out, kMagic);
  binio::write_le<std::uint64_t>(out, text.size());
  binio::write_bytes(out, text);
  const std::size_t count = params_.size() * 3 + 1;
  binio::write_le<std::uint64_t>(out, count);
  for (const auto& t : params_) write_tensor(out, t.name, t.rows, t.cols, t.data);
  for (const auto& t : adam.m) write_tensor(out, "adam.m." + t.name, t.rows, t.cols, t.data);
  for (const auto& t : adam.v) write_tensor(out, "adam.v." + t.name, t.rows, t.cols, t.data);
  write_tensor(out, "unseen_vector", 1, unseen_vector.size(), unseen_vector);
  if (!out) throw ResourceError("checkpoint: write failed");
}

GnceModel GnceModel::read(std::istream& in, std::optional<MessageFn> expected) {
  binio::expect_magic(in, kMagic, "checkpoint");
  const auto header_len = binio::read_le<std::uint64_t>(in);
  if (header_len > (1u << 24)) throw DataError("checkpoint: header length out of range");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(binio::read_bytes(in, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: corrupt header: ") + e.what());
  }

  GnceModel model;
  try {
    if (header.at("format_version").get<int>() != kFormatVersion)
      throw DataError("checkpoint: unsupported format version " + header.at("format_version").dump());
    const auto& c = header.at("config");
    model.config_.D = c.at("D").get<std::size_t>();
    model.config_.H = c.at("H").get<std::size_t>();
    model.config_.message = parse_message_fn(c.at("message").get<std::string>());
    model.config_.epsilon = c.at("epsilon").get<double>();
    model.config_.seed = c.at("seed").get<std::uint64_t>();
    model.config_.featurization = parse_feature_mode(c.at("featurization").get<std::string>());
    model.config_.occ_scale = parse_occ_scale(c.at("occ_scale").get<std::string>());
    model.adam.step = header.at("adam_step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: corrupt header: ") + e.what());
  } catch (const PreconditionError& e) {
    throw DataError(std::string("checkpoint: corrupt header: ") + e.what());
  }
  if (model.config_.D < 2 || model.config_.D > 4096 || model.config_.H < 1 || model.config_.H > 4096)
    throw DataError("checkpoint: model widths out of range");
  if (expected && *expected != model.config_.message)
    throw ConfigMismatchError("checkpoint was trained with message function '" +
                              std::string(message_fn_name(model.config_.message)) + "', requested '" +
                              std::string(message_fn_name(*expected)) + "'");

  const std::uint64_t step = model.adam.step;
  model.build_layout();
  model.adam.step = step;

  const auto count = binio::read_le<std::uint64_t>(in);
  if (count != model.params_.size() * 3 + 1) throw DataError("checkpoint: unexpected tensor count");
  auto fill = [&](Tensor& dst, const std::string& name) {
    Tensor t = read_tensor(in);
    if (t.name != name || t.rows != dst.rows || t.cols != dst.cols)
      throw DataError("checkpoint: expected tensor '" + name + "' with shape " + std::to_string(dst.rows) + "x" +
                      std::to_string(dst.cols) + ", found '" + t.name + "' " + std::to_string(t.rows) + "x" +
                      std::to_string(t.cols));
    dst.data = std::move(t.data);
  };
  for (auto& t : model.params_) fill(t, t.name);
  for (auto& t : model.adam.m) fill(t, "adam.m." + t.name);
  for (auto& t : model.adam.v) fill(t, "adam.v." + t.name);
  Tensor unseen{"unseen_vector", 1, model.config_.D - 1, AlignedDoubles(model.config_.D - 1)};
  fill(unseen, "unseen_vector");
  model.unseen_vector.assign(unseen.data.begin(), unseen.data.end());
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint: trailing bytes");
  return model;
}

void GnceModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot open " + path.string() + " for writing");
  write(out);
}

GnceModel GnceModel::load(const std::filesystem::path& path, std::optional<MessageFn> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read(in, expected);
}

}  // namespace gnce
