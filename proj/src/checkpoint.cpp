#include "hain/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hain/common.hpp"

namespace hain {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

static_assert(sizeof(double) == 8);

void append_le_doubles(std::string& out, const double* data, std::size_t count) {
  const std::size_t start = out.size();
  out.resize(start + count * 8);
  std::memcpy(out.data() + start, data, count * 8);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < count; ++i)
      std::reverse(out.begin() + std::ptrdiff_t(start + i * 8),
                   out.begin() + std::ptrdiff_t(start + (i + 1) * 8));
  }
}

void read_le_doubles(const std::string& payload, std::size_t offset, double* out,
                     std::size_t count) {
  std::memcpy(out, payload.data() + offset, count * 8);
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<unsigned char*>(out);
    for (std::size_t i = 0; i < count; ++i) std::reverse(bytes + i * 8, bytes + (i + 1) * 8);
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

ordered_json config_to_json(const HainConfig& cfg) {
  ordered_json j;
  j["input_dim"] = cfg.input_dim;
  j["embed_dim"] = cfg.embed_dim;
  j["group_size"] = cfg.group_size;
  j["key_dim"] = cfg.key_dim;
  j["hidden_dim"] = cfg.hidden_dim;
  j["num_classes"] = cfg.num_classes;
  j["reduced_dim"] = cfg.reduced_dim;
  j["seed"] = cfg.seed;
  return j;
}

HainConfig config_from_json(const json& j) {
  HainConfig cfg;
  cfg.input_dim = j.at("input_dim").get<std::size_t>();
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.group_size = j.at("group_size").get<std::size_t>();
  cfg.key_dim = j.at("key_dim").get<std::size_t>();
  cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  cfg.num_classes = j.at("num_classes").get<std::size_t>();
  cfg.reduced_dim = j.at("reduced_dim").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

ordered_json train_config_to_json(const TrainConfig& cfg) {
  ordered_json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["lr_decay"] = cfg.lr_decay;
  j["lambda1"] = cfg.loss_weights.lambda1;
  j["lambda2"] = cfg.loss_weights.lambda2;
  j["lambda3"] = cfg.loss_weights.lambda3;
  j["target_sparsity"] = cfg.target_sparsity;
  j["temp_start"] = cfg.temp_start;
  j["temp_end"] = cfg.temp_end;
  j["temp_decay"] = cfg.temp_decay;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["max_staleness"] = cfg.max_staleness;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("lr_decay")) cfg.lr_decay = j.at("lr_decay").get<double>();
  if (j.contains("lambda1")) cfg.loss_weights.lambda1 = j.at("lambda1").get<double>();
  if (j.contains("lambda2")) cfg.loss_weights.lambda2 = j.at("lambda2").get<double>();
  if (j.contains("lambda3")) cfg.loss_weights.lambda3 = j.at("lambda3").get<double>();
  if (j.contains("target_sparsity")) cfg.target_sparsity = j.at("target_sparsity").get<double>();
  if (j.contains("temp_start")) cfg.temp_start = j.at("temp_start").get<double>();
  if (j.contains("temp_end")) cfg.temp_end = j.at("temp_end").get<double>();
  if (j.contains("temp_decay")) cfg.temp_decay = j.at("temp_decay").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) cfg.workers = j.at("workers").get<std::size_t>();
  if (j.contains("max_staleness")) cfg.max_staleness = j.at("max_staleness").get<std::size_t>();
  cfg.validate();
  return cfg;
}

ordered_json synthetic_spec_to_json(const SyntheticSpec& spec) {
  ordered_json j;
  j["n"] = spec.n;
  j["d"] = spec.d;
  j["num_classes"] = spec.num_classes;
  j["n_informative"] = spec.n_informative;
  j["separation"] = spec.separation;
  j["noise_stddev"] = spec.noise_stddev;
  j["seed"] = spec.seed;
  return j;
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  SyntheticSpec spec;
  if (j.contains("n")) spec.n = j.at("n").get<std::size_t>();
  if (j.contains("d")) spec.d = j.at("d").get<std::size_t>();
  if (j.contains("num_classes")) spec.num_classes = j.at("num_classes").get<std::size_t>();
  if (j.contains("n_informative")) spec.n_informative = j.at("n_informative").get<std::size_t>();
  if (j.contains("separation")) spec.separation = j.at("separation").get<double>();
  if (j.contains("noise_stddev")) spec.noise_stddev = j.at("noise_stddev").get<double>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

ordered_json selection_to_json(const SelectionState& sel) {
  ordered_json j;
  j["tau"] = sel.tau;
  j["selected"] = sel.selected;
  j["alpha_snapshot"] = sel.alpha_snapshot;
  j["gate_snapshot"] = sel.gate_snapshot;
  return j;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  c.params.config.validate();

  // Payload: model matrices first, then auxiliary numeric blocks.
  struct Block {
    std::string name;
    const double* data;
    std::size_t rows, cols;
  };
  std::vector<Block> blocks;
  for (const auto& [name, m] : c.params.named_matrices())
    blocks.push_back({name, m->data(), m->rows(), m->cols()});
  if (c.standardization) {
    blocks.push_back({"std.mean", c.standardization->mean.data(), 1, c.standardization->mean.size()});
    blocks.push_back({"std.stddev", c.standardization->stddev.data(), 1, c.standardization->stddev.size()});
  }
  if (c.selection) {
    blocks.push_back({"selection.alpha", c.selection->alpha_snapshot.data(), 1,
                      c.selection->alpha_snapshot.size()});
    blocks.push_back({"selection.gates", c.selection->gate_snapshot.data(), 1,
                      c.selection->gate_snapshot.size()});
  }
  if (c.prototypes) {
    blocks.push_back({"prototypes", c.prototypes->prototypes.data(),
                      c.prototypes->prototypes.rows(), c.prototypes->prototypes.cols()});
  }

  std::string payload;
  ordered_json manifest = ordered_json::array();
  for (const Block& b : blocks) {
    ordered_json entry;
    entry["name"] = b.name;
    entry["rows"] = b.rows;
    entry["cols"] = b.cols;
    entry["offset"] = payload.size();
    manifest.push_back(entry);
    append_le_doubles(payload, b.data, b.rows * b.cols);
  }

  ordered_json header;
  header["format"] = "hain-checkpoint";
  header["format_version"] = c.format_version;
  header["payload_bytes"] = payload.size();
  header["payload_fnv64"] = hex64(fnv1a64(payload.data(), payload.size(), 1469598103934665603ULL));
  header["config"] = config_to_json(c.params.config);
  header["group_sizes"] = c.group_sizes;
  header["feature_names"] = c.feature_names;
  header["class_names"] = c.class_names;
  header["training_seed"] = c.training_seed;
  header["train_config"] = c.train_config ? train_config_to_json(*c.train_config) : ordered_json(nullptr);
  if (c.selection) {
    ordered_json sel;
    sel["tau"] = c.selection->tau;
    sel["selected"] = c.selection->selected;
    header["selection"] = sel;
  } else {
    header["selection"] = nullptr;
  }
  if (c.prototypes) {
    ordered_json proto;
    proto["sigma"] = c.prototypes->sigma;
    proto["theta"] = c.prototypes->theta;
    proto["labels"] = c.prototypes->labels;
    header["prototypes"] = proto;
  } else {
    header["prototypes"] = nullptr;
  }
  header["matrices"] = manifest;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_checkpoint: cannot open " + path + " for writing");
  out << header.dump() << "\n";
  out.write(payload.data(), std::ptrdiff_t(payload.size()));
  if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw FormatError("load_checkpoint: missing header line");
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("load_checkpoint: bad header JSON: ") + e.what());
  }
  if (header.value("format", "") != "hain-checkpoint")
    throw FormatError("load_checkpoint: not a hain checkpoint");
  const auto version = header.at("format_version").get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IncompatibilityError("load_checkpoint: format version " + std::to_string(version) +
                               " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");

  const auto payload_bytes = header.at("payload_bytes").get<std::size_t>();
  std::string payload(payload_bytes, '\0');
  in.read(payload.data(), std::ptrdiff_t(payload_bytes));
  if (std::size_t(in.gcount()) != payload_bytes)
    throw IntegrityError("load_checkpoint: payload truncated (expected " +
                         std::to_string(payload_bytes) + " bytes, got " +
                         std::to_string(in.gcount()) + ")");
  const std::string digest = hex64(fnv1a64(payload.data(), payload.size(), 1469598103934665603ULL));
  if (digest != header.at("payload_fnv64").get<std::string>())
    throw IntegrityError("load_checkpoint: payload checksum mismatch");

  Checkpoint c;
  c.format_version = version;
  const HainConfig cfg = config_from_json(header.at("config"));

  struct Entry {
    std::string name;
    std::size_t rows, cols, offset;
  };
  std::vector<Entry> entries;
  for (const auto& e : header.at("matrices"))
    entries.push_back({e.at("name").get<std::string>(), e.at("rows").get<std::size_t>(),
                       e.at("cols").get<std::size_t>(), e.at("offset").get<std::size_t>()});
  auto fetch = [&](const std::string& name) -> Matrix2D {
    for (const Entry& e : entries) {
      if (e.name != name) continue;
      const std::size_t count = e.rows * e.cols;
      if (e.offset + count * 8 > payload.size())
        throw IntegrityError("load_checkpoint: block '" + name + "' exceeds payload");
      Matrix2D m(e.rows, e.cols);
      read_le_doubles(payload, e.offset, m.data(), count);
      if (!m.all_finite())
        throw IntegrityError("load_checkpoint: block '" + name + "' has non-finite values");
      return m;
    }
    throw FormatError("load_checkpoint: block '" + name + "' missing");
  };

  c.params.config = cfg;
  for (auto& [name, m] : c.params.named_matrices()) *m = fetch(name);

  c.group_sizes = header.at("group_sizes").get<std::vector<std::size_t>>();
  c.feature_names = header.at("feature_names").get<std::vector<std::string>>();
  c.class_names = header.at("class_names").get<std::vector<std::string>>();
  c.training_seed = header.at("training_seed").get<std::uint64_t>();
  if (!header.at("train_config").is_null())
    c.train_config = train_config_from_json(header.at("train_config"));
  if (!header.at("selection").is_null()) {
    SelectionState sel;
    sel.tau = header.at("selection").at("tau").get<double>();
    sel.selected = header.at("selection").at("selected").get<std::vector<std::size_t>>();
    sel.alpha_snapshot = fetch("selection.alpha").storage();
    sel.gate_snapshot = fetch("selection.gates").storage();
    c.selection = std::move(sel);
  }
  if (!header.at("prototypes").is_null()) {
    PrototypeSet set;
    set.prototypes = fetch("prototypes");
    set.sigma = header.at("prototypes").at("sigma").get<double>();
    set.theta = header.at("prototypes").at("theta").get<double>();
    set.labels = header.at("prototypes").at("labels").get<std::vector<int>>();
    c.prototypes = std::move(set);
  }
  const std::string std_name = "std.mean";
  for (const Entry& e : entries) {
    if (e.name == std_name) {
      Standardization st;
      st.mean = fetch("std.mean").storage();
      st.stddev = fetch("std.stddev").storage();
      c.standardization = std::move(st);
      break;
    }
  }
  return c;
}

}  // namespace hain
