#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "deconv/version.hpp"

namespace deconv {

// Every run records its fully resolved configuration next to the outputs;
// rerunning from the manifest reproduces them bit-identically.
inline void write_manifest(const std::filesystem::path& out_dir, const std::string& subcommand,
                           const nlohmann::json& resolved_config) {
  nlohmann::json m;
  m["artifact"] = kArtifactName;
  m["version"] = kVersion;
  m["subcommand"] = subcommand;
  m["config"] = resolved_config;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in '" + out_dir.string() + "'");
  out << m.dump(2) << "\n";
}

}  // namespace deconv
