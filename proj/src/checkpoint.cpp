#include "checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "errors.hpp"

namespace gicn {

namespace {
constexpr char kMagic[8] = {'G', 'I', 'C', 'N', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const std::string& path,
                     const std::map<std::string, ad::Tensor>& params,
                     const nlohmann::json& meta) {
  nlohmann::json index;
  index["meta"] = meta;
  uint64_t offset = 0;  // in doubles, from the start of the data section
  nlohmann::json pj = nlohmann::json::object();
  for (const auto& [name, t] : params) {
    pj[name] = {{"rows", t.rows}, {"cols", t.cols}, {"offset", offset}};
    offset += t.size();
  }
  index["params"] = pj;
  std::string js = index.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_checkpoint: cannot open '" + path + "' for writing");
  out.write(kMagic, 8);
  uint64_t len = js.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(js.data(), std::streamsize(js.size()));
  for (const auto& [name, t] : params)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              std::streamsize(t.size() * sizeof(double)));
  if (!out) throw IoError("save_checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw ParseError("load_checkpoint: '" + path + "' is not a checkpoint file");
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string js(len, '\0');
  in.read(js.data(), std::streamsize(len));
  if (!in) throw ParseError("load_checkpoint: truncated index in '" + path + "'");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("load_checkpoint: bad index JSON: ") + e.what());
  }

  Checkpoint ck;
  ck.meta = index.value("meta", nlohmann::json::object());
  for (auto& [name, desc] : index.at("params").items()) {
    ad::Tensor t(desc.at("rows").get<int>(), desc.at("cols").get<int>());
    in.seekg(std::streamoff(16 + len + desc.at("offset").get<uint64_t>() * sizeof(double)));
    in.read(reinterpret_cast<char*>(t.data.data()),
            std::streamsize(t.size() * sizeof(double)));
    if (!in) throw ParseError("load_checkpoint: truncated data for parameter '" + name + "'");
    ck.params.emplace(name, std::move(t));
  }
  return ck;
}

}  // namespace gicn
