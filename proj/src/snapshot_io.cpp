#include "deepsplit/snapshot_io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace deepsplit {

static_assert(std::endian::native == std::endian::little,
              "snapshot format is little-endian; byte-swapping is not implemented");

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_doubles(std::ostream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double)) * v.size());
}

void read_doubles(std::istream& in, Eigen::VectorXd& v) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double)) * v.size());
  if (!in) throw std::runtime_error("snapshot: truncated payload");
}

}  // namespace

void write_snapshot(std::ostream& out, const Snapshot& snapshot) {
  const auto& arch = snapshot.params.arch();
  out << "deepsplit-snapshot v1\n";
  out << "layout_version " << kSnapshotLayoutVersion << "\n";
  out << "input_dim " << arch.input_dim << "\n";
  out << "depth " << arch.depth << "\n";
  out << "hidden_width " << arch.hidden_width << "\n";
  out << "activation " << (arch.activation == Activation::relu ? "relu" : "logistic") << "\n";
  out << "bn_sites ";
  bool first = true;
  for (int site = 0; site <= arch.depth; ++site) {
    if (!arch.has_bn(site)) continue;
    if (!first) out << ",";
    out << site;
    first = false;
  }
  if (first) out << "none";
  out << "\n";
  out << "bn_momentum " << format_double(snapshot.bn.momentum) << "\n";
  out << "bn_step_count " << snapshot.bn.step_count << "\n";
  out << "param_count " << snapshot.params.values().size() << "\n";
  out << "bn_feature_count " << snapshot.bn.mean.size() << "\n";
  out << "end-header\n";
  write_doubles(out, snapshot.params.values());
  write_doubles(out, snapshot.bn.mean);
  write_doubles(out, snapshot.bn.var);
}

Snapshot read_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "deepsplit-snapshot v1")
    throw std::runtime_error("snapshot: bad magic line");

  std::map<std::string, std::string> fields;
  while (std::getline(in, line)) {
    if (line == "end-header") break;
    const auto space = line.find(' ');
    if (space == std::string::npos) throw std::runtime_error("snapshot: malformed header line");
    fields[line.substr(0, space)] = line.substr(space + 1);
  }
  if (line != "end-header") throw std::runtime_error("snapshot: missing end-header");

  auto need = [&](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw std::runtime_error("snapshot: missing field " + key);
    return it->second;
  };

  if (std::stoi(need("layout_version")) != kSnapshotLayoutVersion)
    throw std::runtime_error("snapshot: unsupported layout version");

  NetworkArchitecture arch;
  arch.input_dim = std::stoi(need("input_dim"));
  arch.depth = std::stoi(need("depth"));
  arch.hidden_width = std::stoi(need("hidden_width"));
  const std::string act = need("activation");
  if (act == "relu") {
    arch.activation = Activation::relu;
  } else if (act == "logistic") {
    arch.activation = Activation::logistic;
  } else {
    throw std::runtime_error("snapshot: unknown activation " + act);
  }
  arch.bn_sites.assign(static_cast<std::size_t>(arch.depth) + 1, false);
  const std::string sites = need("bn_sites");
  if (sites != "none") {
    std::stringstream ss(sites);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const int site = std::stoi(tok);
      if (site < 0 || site > arch.depth) throw std::runtime_error("snapshot: bad bn site");
      arch.bn_sites[static_cast<std::size_t>(site)] = true;
    }
  }
  arch.validate();

  Snapshot snapshot;
  snapshot.params = ParameterVector(std::make_shared<const ParameterLayout>(arch));
  snapshot.bn = BatchNormState::fresh(arch, std::stod(need("bn_momentum")));
  snapshot.bn.step_count = std::stol(need("bn_step_count"));

  if (std::stol(need("param_count")) != snapshot.params.values().size())
    throw std::runtime_error("snapshot: parameter count does not match the architecture");
  if (std::stol(need("bn_feature_count")) != snapshot.bn.mean.size())
    throw std::runtime_error("snapshot: feature count does not match the architecture");

  read_doubles(in, snapshot.params.mutable_values());
  read_doubles(in, snapshot.bn.mean);
  read_doubles(in, snapshot.bn.var);
  return snapshot;
}

void save_snapshot(const std::string& path, const Snapshot& snapshot) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("snapshot: cannot open " + path + " for writing");
  write_snapshot(out, snapshot);
  if (!out) throw std::runtime_error("snapshot: write failed for " + path);
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("snapshot: cannot open " + path);
  return read_snapshot(in);
}

std::string snapshot_bytes(const Snapshot& snapshot) {
  std::ostringstream out(std::ios::binary);
  write_snapshot(out, snapshot);
  return std::move(out).str();
}

}  // namespace deepsplit
