#include "focusclf/cnn/checkpoint.hpp"

#include <cmath>

#include "focusclf/data/binary.hpp"
#include "focusclf/errors.hpp"

namespace focusclf::cnn {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'C', 'L', 'F'};

void put_json(data::ByteWriter& w, const json& j) {
  const std::string text = j.dump();
  w.put_u32(static_cast<std::uint32_t>(text.size()));
  w.put_string(text);
}

json get_json(data::ByteReader& r, const std::string& origin, const char* what) {
  const std::string text = r.get_string(r.get_u32());
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(origin + ": malformed " + what + " block: " + e.what());
  }
}

// NaN has no JSON spelling; it is written as null and read back as NaN.
json number(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return eval::kNaN;
  return j.at(key).get<double>();
}

std::string moment_name(char which, const std::string& name) { return std::string("adam.") + which + "." + name; }

}  // namespace

const TensorF& Container::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw FormatError("container of kind " + kind + " has no tensor named " + name);
}

bool Container::has_tensor(const std::string& name) const {
  for (const auto& entry : tensors)
    if (entry.first == name) return true;
  return false;
}

std::vector<std::uint8_t> encode_container(const Container& c) {
  if (c.kind.size() != 4) throw ConfigError("container kind must be four characters, got '" + c.kind + "'");
  data::ByteWriter w;
  w.put_string(std::string(kMagic, 4));
  w.put_u32(kContainerVersion);
  w.put_string(c.kind);
  put_json(w, c.config);
  w.put_u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    w.put_u32(static_cast<std::uint32_t>(name.size()));
    w.put_string(name);
    w.put_u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.put_u32(static_cast<std::uint32_t>(e));
    w.put_f32s(t.data());
  }
  put_json(w, c.log);
  return std::move(w.bytes());
}

Container decode_container(std::span<const std::uint8_t> bytes, const std::string& origin) {
  data::ByteReader r(bytes, origin);
  if (r.get_string(4) != std::string(kMagic, 4)) throw FormatError(origin + ": not a checkpoint (bad magic)");
  const std::uint32_t version = r.get_u32();
  if (version != kContainerVersion) {
    throw FormatError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  Container c;
  c.kind = r.get_string(4);
  c.config = get_json(r, origin, "config");
  const std::uint32_t count = r.get_u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string(r.get_u32());
    const std::uint32_t rank = r.get_u32();
    if (rank == 0 || rank > 8) throw FormatError(origin + ": tensor " + name + " has invalid rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
      e = r.get_u32();
      if (e == 0) throw FormatError(origin + ": tensor " + name + " has a zero extent");
      n *= e;
    }
    r.need(4 * n);
    std::vector<float> values(n);
    r.get_f32s(values);
    c.tensors.emplace_back(std::move(name), TensorF(std::move(shape), std::move(values)));
  }
  c.log = get_json(r, origin, "log");
  if (r.remaining() != 0) throw FormatError(origin + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& container) {
  data::write_file_bytes(path.string(), encode_container(container));
}

Container read_container(const std::filesystem::path& path, const std::string& expected_kind) {
  Container c = decode_container(data::read_file_bytes(path.string()), path.string());
  if (c.kind != expected_kind) {
    throw FormatError(path.string() + ": expected a " + expected_kind + " record, found " + c.kind);
  }
  return c;
}

json to_json(const eval::MetricsReport& m) {
  return json{{"tp", m.tp},
              {"fp", m.fp},
              {"tn", m.tn},
              {"fn", m.fn},
              {"sensitivity", number(m.sensitivity)},
              {"specificity", number(m.specificity)},
              {"g_mean", number(m.g_mean)},
              {"accuracy", number(m.accuracy)},
              {"auc", number(m.auc)},
              {"sensitivity_defined", m.sensitivity_defined},
              {"specificity_defined", m.specificity_defined},
              {"auc_defined", m.auc_defined},
              {"fold", m.fold},
              {"fingerprint", m.fingerprint}};
}

eval::MetricsReport metrics_from_json(const json& j) {
  eval::MetricsReport m;
  m.tp = j.value("tp", std::size_t{0});
  m.fp = j.value("fp", std::size_t{0});
  m.tn = j.value("tn", std::size_t{0});
  m.fn = j.value("fn", std::size_t{0});
  m.sensitivity = number(j, "sensitivity");
  m.specificity = number(j, "specificity");
  m.g_mean = number(j, "g_mean");
  m.accuracy = number(j, "accuracy");
  m.auc = number(j, "auc");
  m.sensitivity_defined = j.value("sensitivity_defined", false);
  m.specificity_defined = j.value("specificity_defined", false);
  m.auc_defined = j.value("auc_defined", false);
  m.fold = j.value("fold", -1);
  m.fingerprint = j.value("fingerprint", std::string());
  return m;
}

json to_json(const TrainLog& log) {
  json epochs = json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", number(e.train_loss)}, {"val_accuracy", number(e.val_accuracy)}});
  }
  return json{{"epochs", epochs},
              {"best_epoch", log.best_epoch},
              {"initial_val_accuracy", number(log.initial_val_accuracy)},
              {"best_val_accuracy", number(log.best_val_accuracy)},
              {"stopped_early", log.stopped_early},
              {"best_val", to_json(log.best_val)}};
}

TrainLog train_log_from_json(const json& j) {
  TrainLog log;
  try {
    for (const auto& e : j.value("epochs", json::array())) {
      log.epochs.push_back({e.at("epoch").get<int>(), number(e, "train_loss"), number(e, "val_accuracy")});
    }
    log.best_epoch = j.value("best_epoch", 0);
    log.initial_val_accuracy = number(j, "initial_val_accuracy");
    log.best_val_accuracy = number(j, "best_val_accuracy");
    log.stopped_early = j.value("stopped_early", false);
    if (j.contains("best_val")) log.best_val = metrics_from_json(j.at("best_val"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("training log: ") + e.what());
  }
  return log;
}

Container to_container(const Checkpoint& ck) {
  Container c;
  c.kind = "CNNM";
  c.config = json{{"model", to_json(ck.config)}};
  for (const auto& [name, t] : ck.params.all_tensors()) c.tensors.emplace_back(name, *t);
  if (ck.adam) {
    const auto& a = *ck.adam;
    c.config["adam_step"] = a.step;
    const auto names = ck.params.trainable();
    for (std::size_t i = 0; i < a.first_moment.size() && i < names.size(); ++i) {
      c.tensors.emplace_back(moment_name('m', names[i].first), a.first_moment[i]);
      c.tensors.emplace_back(moment_name('v', names[i].first), a.second_moment[i]);
    }
  }
  c.log = to_json(ck.log);
  return c;
}

ModelParamsF params_from_container(const Container& c, const ModelConfig& config) {
  Rng unused(0);
  ModelParamsF params = build_model(config, unused);
  for (auto& [name, t] : params.all_tensors()) {
    const TensorF& stored = c.tensor(name);
    if (stored.shape() != t->shape()) {
      throw FormatError("tensor " + name + " has shape " + shape_string(stored.shape()) + ", config implies " +
                        shape_string(t->shape()));
    }
    *t = stored;
  }
  return params;
}

Checkpoint checkpoint_from_container(const Container& c) {
  if (c.kind != "CNNM") throw FormatError("expected a CNNM record, found " + c.kind);
  if (!c.config.contains("model")) throw FormatError("checkpoint config block lacks the model section");
  Checkpoint ck;
  ck.config = model_config_from_json(c.config.at("model"));
  ck.config.validate();
  ck.params = params_from_container(c, ck.config);
  if (c.config.contains("adam_step")) {
    numerics::AdamState<float> a;
    a.hyper = ck.config.adam;
    a.step = c.config.at("adam_step").get<std::uint64_t>();
    for (const auto& [name, t] : ck.params.trainable()) {
      if (!c.has_tensor(moment_name('m', name))) break;
      a.first_moment.push_back(c.tensor(moment_name('m', name)));
      a.second_moment.push_back(c.tensor(moment_name('v', name)));
    }
    ck.adam = std::move(a);
  }
  ck.log = train_log_from_json(c.log);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_container(path, to_container(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_container(read_container(path, "CNNM"));
}

}  // namespace focusclf::cnn
