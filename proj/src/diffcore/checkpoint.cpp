#include "nrdectl/diffcore/checkpoint.hpp"

#include <fstream>

#include "nrdectl/errors.hpp"

namespace nrdectl {

namespace {
constexpr const char* kFormat = "nrdectl.checkpoint";
constexpr int kVersion = 1;
}  // namespace

nlohmann::json checkpoint_to_json(const ParameterSet& params, const nlohmann::json& architecture) {
  nlohmann::json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["architecture"] = architecture;
  auto& list = doc["parameters"] = nlohmann::json::array();
  for (const auto& [name, t] : params.entries()) {
    list.push_back({{"name", name}, {"shape", t.shape()}, {"values", t.values()}});
  }
  return doc;
}

ParameterSet checkpoint_from_json(const nlohmann::json& doc, const nlohmann::json& expected_architecture) {
  if (!doc.is_object() || doc.value("format", "") != kFormat) {
    throw std::invalid_argument("not an nrdectl checkpoint");
  }
  if (doc.value("version", 0) != kVersion) {
    throw std::invalid_argument("unsupported checkpoint version " + doc.value("version", nlohmann::json()).dump());
  }
  if (!expected_architecture.is_null() && doc.at("architecture") != expected_architecture) {
    throw std::invalid_argument("checkpoint architecture " + doc.at("architecture").dump() +
                                " does not match expected " + expected_architecture.dump());
  }
  ParameterSet params;
  for (const auto& entry : doc.at("parameters")) {
    auto shape = entry.at("shape").get<Shape>();
    auto values = entry.at("values").get<std::vector<double>>();
    params.add(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values)));
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const nlohmann::json& architecture) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(params, architecture).dump(1) << '\n';
}

ParameterSet load_checkpoint(const std::filesystem::path& path, const nlohmann::json& expected_architecture) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return checkpoint_from_json(nlohmann::json::parse(in), expected_architecture);
}

}  // namespace nrdectl
