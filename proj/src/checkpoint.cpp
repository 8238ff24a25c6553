#include "hebbes/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "hebbes/config.hpp"

namespace hebbes {

namespace {

constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::vector<std::uint8_t>& buf, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= buf[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& buf, double d) {
  put_u64(buf, std::bit_cast<std::uint64_t>(d));
}

void put_matrix(std::vector<std::uint8_t>& buf, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(buf, m(r, c));
  }
}

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw ConfigError("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  void matrix(Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    }
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const EsState& state,
                     const EsConfig& cfg, std::uint64_t config_hash_value) {
  const GenotypeModel& model = state.model;
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kCheckpointMagic, kCheckpointMagic + 8);
  put_u32(buf, kVersion);
  put_u64(buf, config_hash_value);
  put_u64(buf, state.base_seed);
  put_u64(buf, static_cast<std::uint64_t>(state.generation));
  put_u32(buf, static_cast<std::uint32_t>(model.kind()));
  put_u32(buf, static_cast<std::uint32_t>(model.rows()));
  put_u32(buf, static_cast<std::uint32_t>(model.components()));
  put_u32(buf, static_cast<std::uint32_t>(model.cols()));
  put_f64(buf, model.sigma());
  bool has_lambda = model.has_lambda();
  bool has_k = !model.fixed_assignment().empty();
  bool has_adam = cfg.updater == Updater::Adam;
  buf.push_back(has_lambda ? 1 : 0);
  buf.push_back(has_k ? 1 : 0);
  buf.push_back(has_adam ? 1 : 0);
  put_matrix(buf, model.mu());
  if (has_lambda) put_matrix(buf, model.lambda());
  if (has_k) {
    for (int k : model.fixed_assignment()) put_u32(buf, static_cast<std::uint32_t>(k));
  }
  if (has_adam) {
    put_matrix(buf, state.adam_m.mu);
    put_matrix(buf, state.adam_v.mu);
    if (has_lambda) {
      put_matrix(buf, state.adam_m.lambda);
      put_matrix(buf, state.adam_v.lambda);
    }
  }
  put_u64(buf, fnv1a(buf, buf.size()));

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + tmp);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("short write on checkpoint: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

EsState load_checkpoint(const std::string& path, const EsConfig& cfg,
                        std::uint64_t expected_config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (buf.size() < 8 + 4 + 8) throw ConfigError("checkpoint truncated");
  if (std::memcmp(buf.data(), kCheckpointMagic, 8) != 0) {
    throw ConfigError("not a checkpoint file: " + path);
  }
  std::uint64_t stored_sum = 0;
  for (int i = 0; i < 8; ++i) {
    stored_sum |= static_cast<std::uint64_t>(buf[buf.size() - 8 + i]) << (8 * i);
  }
  if (fnv1a(buf, buf.size() - 8) != stored_sum) {
    throw ConfigError("checkpoint checksum mismatch: " + path);
  }

  Reader r{buf, 8};
  std::uint32_t version = r.u32();
  if (version != kVersion) throw ConfigError("unsupported checkpoint version");
  std::uint64_t hash = r.u64();
  if (hash != expected_config_hash) {
    throw ConfigError("checkpoint was produced by a different config");
  }
  std::uint64_t base_seed = r.u64();
  long generation = static_cast<long>(r.u64());
  auto kind = static_cast<ModelKind>(r.u32());
  int rows = static_cast<int>(r.u32());
  int components = static_cast<int>(r.u32());
  int cols = static_cast<int>(r.u32());
  double sigma = r.f64();
  bool has_lambda = r.u8() != 0;
  bool has_k = r.u8() != 0;
  bool has_adam = r.u8() != 0;

  Matrix mu_buf(kind == ModelKind::PerSynapse ? rows : components, cols);
  r.matrix(mu_buf);
  Matrix lambda_buf;
  if (has_lambda) {
    lambda_buf.resize(rows, components);
    r.matrix(lambda_buf);
  }
  std::vector<int> assignment;
  if (has_k) {
    assignment.resize(rows);
    for (int i = 0; i < rows; ++i) assignment[i] = static_cast<int>(r.u32());
  }

  GenotypeModel model = [&] {
    switch (kind) {
      case ModelKind::PerSynapse: return GenotypeModel::per_synapse(rows, cols, sigma);
      case ModelKind::SharedGmm:
        return GenotypeModel::shared_gmm(rows, components, cols, sigma);
      case ModelKind::JointGmm:
        return GenotypeModel::joint_gmm(rows, components, cols, sigma);
      case ModelKind::SingleRule: return GenotypeModel::single_rule(rows, cols, sigma);
      case ModelKind::FixedRandom:
        return GenotypeModel::fixed_random_with(rows, components, cols, sigma,
                                                assignment);
    }
    throw ConfigError("unknown model kind in checkpoint");
  }();
  if (has_lambda != model.has_lambda()) {
    throw ConfigError("lambda block does not match model kind");
  }
  if (has_k != !model.fixed_assignment().empty()) {
    throw ConfigError("assignment block does not match model kind");
  }
  model.mu() = mu_buf;
  if (has_lambda) model.lambda() = lambda_buf;
  if (has_adam != (cfg.updater == Updater::Adam)) {
    throw ConfigError("checkpoint optimizer does not match config");
  }
  EsState state(std::move(model), cfg, base_seed);
  state.generation = generation;
  if (has_adam) {
    r.matrix(state.adam_m.mu);
    r.matrix(state.adam_v.mu);
    if (has_lambda) {
      r.matrix(state.adam_m.lambda);
      r.matrix(state.adam_v.lambda);
    }
  }
  return state;
}

}  // namespace hebbes
