#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/hash.hpp"
#include "ftsbench/generators/dataset.hpp"

namespace ftsbench::generators {

/// %.17g round-trips every double exactly.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& header) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_real(m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline Matrix matrix_from_csv(const std::string& text, std::vector<std::string>* header = nullptr) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("csv: missing header");
  std::vector<std::string> cols;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) cols.push_back(cell);
  }
  std::vector<double> data;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ls, cell, ',')) {
      data.push_back(std::stod(cell));
      ++n;
    }
    if (n != cols.size()) throw IoError("csv: row " + std::to_string(rows) + " has " + std::to_string(n) + " cells");
    ++rows;
  }
  if (header) *header = cols;
  return Matrix(rows, cols.size(), std::move(data));
}

struct PanelFiles {
  std::string returns;
  std::string manifest;
  std::string variance;
  std::string jumps;
  std::string regime;

  explicit PanelFiles(const std::string& base)
      : returns(base + ".csv"),
        manifest(base + ".manifest.json"),
        variance(base + ".variance"),
        jumps(base + ".jumps"),
        regime(base + ".regime") {}
};

/// Writes `<base>.csv`, the sidecar manifest and the auxiliary channels. Returns the manifest.
inline nlohmann::json write_panel(const std::string& base, const ReturnPanel& panel,
                                  const nlohmann::json& spec) {
  const PanelFiles f(base);
  const std::string csv = matrix_to_csv(panel.returns, panel.ids);
  write_file(f.returns, csv);
  write_file(f.variance, matrix_to_csv(panel.variance, panel.ids));
  write_file(f.jumps, matrix_to_csv(panel.jumps, panel.ids));
  std::string reg = "regime,jump_regime\n";
  for (std::size_t t = 0; t < panel.steps(); ++t)
    reg += std::to_string(panel.regime[t]) + "," + std::to_string(panel.jump_regime[t]) + "\n";
  write_file(f.regime, reg);
  nlohmann::json manifest = {{"schema_version", 1},
                             {"spec", spec},
                             {"seed", spec.value("seed", 0)},
                             {"spec_hash", panel.spec_hash},
                             {"steps", panel.steps()},
                             {"instruments", panel.instruments()},
                             {"content_sha256", sha256_hex(csv)}};
  write_file(f.manifest, manifest.dump(2) + "\n");
  return manifest;
}

/// Reads a panel written by write_panel; the content hash in the manifest is verified.
inline ReturnPanel read_panel(const std::string& base) {
  const PanelFiles f(base);
  const std::string csv = read_file(f.returns);
  const auto manifest = nlohmann::json::parse(read_file(f.manifest));
  if (manifest.at("content_sha256").get<std::string>() != sha256_hex(csv))
    throw IoError("panel " + base + ": content hash mismatch");
  ReturnPanel p;
  p.returns = matrix_from_csv(csv, &p.ids);
  p.variance = matrix_from_csv(read_file(f.variance));
  p.jumps = matrix_from_csv(read_file(f.jumps));
  const Matrix reg = matrix_from_csv(read_file(f.regime));
  for (std::size_t t = 0; t < reg.rows(); ++t) {
    p.regime.push_back(static_cast<int>(reg(t, 0)));
    p.jump_regime.push_back(static_cast<int>(reg(t, 1)));
  }
  p.spec_hash = manifest.value("spec_hash", "");
  p.validate();
  return p;
}

}  // namespace ftsbench::generators
