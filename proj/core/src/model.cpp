#include "nmstpp/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nmstpp/io.hpp"
#include "nmstpp/version.hpp"

namespace nmstpp::model {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

std::optional<Activation> activation_from_string(const std::string& s) {
  if (s == "none") return Activation::None;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  return std::nullopt;
}

const char* to_string(Head h) {
  switch (h) {
    case Head::T: return "t";
    case Head::Z: return "z";
    case Head::M: return "m";
  }
  return "?";
}

std::string order_to_string(const std::array<Head, 3>& order) {
  std::string s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) s += ',';
    s += to_string(order[i]);
  }
  return s;
}

std::optional<std::array<Head, 3>> order_from_string(const std::string& s) {
  std::array<Head, 3> order{};
  std::size_t n = 0;
  for (char c : s) {
    if (c == ',' || c == ' ') continue;
    if (n == 3) return std::nullopt;
    if (c == 't') order[n] = Head::T;
    else if (c == 'z') order[n] = Head::Z;
    else if (c == 'm') order[n] = Head::M;
    else return std::nullopt;
    ++n;
  }
  if (n != 3) return std::nullopt;
  std::array<bool, 3> seen{};
  for (Head h : order) seen[static_cast<int>(h)] = true;
  if (!seen[0] || !seen[1] || !seen[2]) return std::nullopt;
  return order;
}

void ModelConfig::validate() const {
  if (seqlen < 1) throw Error("ModelConfig: seqlen must be >= 1");
  if (zone_emb_dim < 1 || action_emb_dim < 1 || continuous_dense_dim < 1)
    throw Error("ModelConfig: embedding widths must be >= 1");
  if (dim_feedforward < 1) throw Error("ModelConfig: dim_feedforward >= 1");
  if (history_dim < 1) throw Error("ModelConfig: history_dim must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw Error("ModelConfig: dropout must lie in [0,1)");
  if (n_encoder_layers < 1) throw Error("ModelConfig: n_encoder_layers >= 1");
  if (n_heads != 1)
    throw Error("ModelConfig: only single-head attention is supported");
  if (num_layers_t < 0 || num_layers_z < 0 || num_layers_m < 0)
    throw Error("ModelConfig: head layer counts must be >= 0");
  std::array<bool, 3> seen{};
  for (Head h : order) seen[static_cast<int>(h)] = true;
  if (!seen[0] || !seen[1] || !seen[2])
    throw Error("ModelConfig: order must be a permutation of t,z,m");
}

void Parameters::add(const std::string& name, Eigen::MatrixXd tensor) {
  if (index_.count(name)) throw Error("duplicate parameter " + name);
  index_[name] = tensors_.size();
  tensors_.emplace_back(name, std::move(tensor));
}

Eigen::MatrixXd& Parameters::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return tensors_[it->second].second;
}

const Eigen::MatrixXd& Parameters::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return tensors_[it->second].second;
}

bool Parameters::has(const std::string& name) const {
  return index_.count(name) != 0;
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += static_cast<std::size_t>(t.size());
  return n;
}

Eigen::MatrixXd positional_encoding(int seqlen, int d_model) {
  if (seqlen < 1 || d_model < 1)
    throw Error("positional_encoding: invalid shape");
  Eigen::MatrixXd z(seqlen, d_model);
  for (int n = 0; n < seqlen; ++n) {
    for (int c = 0; c < d_model; ++c) {
      const int k2 = c - (c % 2);  // the pair's even index
      const double denom = std::pow(10000.0, static_cast<double>(k2) / d_model);
      const double arg = static_cast<double>(n) / denom;
      z(n, c) = (c % 2 == 0) ? std::sin(arg) : std::cos(arg);
    }
  }
  return z;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw Error("softmax: empty input");
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

Prediction predict_distribution(const ForecastOutput& out) {
  Prediction p;
  p.t_hat = out.t_hat;
  p.zone_pmf = softmax(out.z_logits);
  p.action_pmf = softmax(out.m_logits);
  Eigen::Index zi, mi;
  out.z_logits.maxCoeff(&zi);
  out.m_logits.maxCoeff(&mi);
  p.zone_argmax = static_cast<int>(zi) + 1;
  p.action_argmax = static_cast<int>(mi) + 1;
  return p;
}

int Nmstpp::head_output_dim(Head h) {
  return h == Head::T ? 1 : h == Head::Z ? kNumZones : kNumActions;
}

int Nmstpp::head_input_dim(Head h) const {
  int dim = config_.history_dim;
  if (!config_.dependent) return dim;
  for (Head earlier : config_.order) {
    if (earlier == h) break;
    dim += head_output_dim(earlier);
  }
  return dim;
}

Nmstpp::Nmstpp(ModelConfig config) : config_(config) {
  config_.validate();
  build_shapes();
}

void Nmstpp::build_shapes() {
  const int d = config_.d_model();
  auto zeros = [](int r, int c) { return Eigen::MatrixXd::Zero(r, c); };

  params_.add("cont_dense.W", zeros(6, config_.continuous_dense_dim));
  params_.add("cont_dense.b", zeros(1, config_.continuous_dense_dim));
  params_.add("zone_emb", zeros(kNumZones, config_.zone_emb_dim));
  params_.add("action_emb", zeros(kNumActions, config_.action_emb_dim));

  for (int l = 0; l < config_.n_encoder_layers; ++l) {
    const std::string p = "enc" + std::to_string(l) + ".";
    for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) params_.add(p + w, zeros(d, d));
    for (const char* b : {"bq", "bk", "bv", "bo"}) params_.add(p + b, zeros(1, d));
    params_.add(p + "ln1.g", Eigen::MatrixXd::Ones(1, d));
    params_.add(p + "ln1.b", zeros(1, d));
    params_.add(p + "ffn.W1", zeros(d, config_.dim_feedforward));
    params_.add(p + "ffn.b1", zeros(1, config_.dim_feedforward));
    params_.add(p + "ffn.W2", zeros(config_.dim_feedforward, d));
    params_.add(p + "ffn.b2", zeros(1, d));
    params_.add(p + "ln2.g", Eigen::MatrixXd::Ones(1, d));
    params_.add(p + "ln2.b", zeros(1, d));
  }

  params_.add("post.W", zeros(d, config_.history_dim));
  params_.add("post.b", zeros(1, config_.history_dim));

  for (Head h : {Head::T, Head::Z, Head::M}) {
    const std::string p = std::string("head_") + to_string(h) + ".";
    int in = head_input_dim(h);
    for (int l = 0; l < config_.num_hidden_layers(h); ++l) {
      const std::string lp = p + "h" + std::to_string(l) + ".";
      params_.add(lp + "W", zeros(in, config_.hidden_dim()));
      params_.add(lp + "b", zeros(1, config_.hidden_dim()));
      in = config_.hidden_dim();
    }
    params_.add(p + "out.W", zeros(in, head_output_dim(h)));
    params_.add(p + "out.b", zeros(1, head_output_dim(h)));
  }
}

std::vector<std::string> Nmstpp::head_param_names(Head h) const {
  const std::string prefix = std::string("head_") + to_string(h) + ".";
  std::vector<std::string> names;
  for (const auto& [name, tensor] : params_)
    if (name.starts_with(prefix)) names.push_back(name);
  return names;
}

Nmstpp Nmstpp::init(const ModelConfig& config, std::uint64_t seed) {
  Nmstpp model(config);
  std::mt19937_64 rng(seed);
  for (auto& [name, tensor] : model.params_) {
    // Leaf name decides the role: b* are biases (zero), g is a layer-norm
    // gain (one); both keep their build_shapes() values.
    const auto dot = name.rfind('.');
    const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
    if (leaf[0] == 'b' || leaf == "g") continue;
    const double fan_in = static_cast<double>(tensor.rows());
    const double fan_out = static_cast<double>(tensor.cols());
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < tensor.rows(); ++r)
      for (Eigen::Index c = 0; c < tensor.cols(); ++c) tensor(r, c) = dist(rng);
  }
  return model;
}

BoundParams Nmstpp::bind(ad::Tape& tape, bool requires_grad) const {
  BoundParams bound;
  for (const auto& [name, tensor] : params_)
    bound[name] = tape.input(tensor, requires_grad);
  return bound;
}

namespace {

ad::Var affine(ad::Tape& t, ad::Var x, const BoundParams& p,
               const std::string& w, const std::string& b) {
  return t.add_rowvec(t.matmul(x, p.at(w)), p.at(b));
}

ad::Var activate(ad::Tape& t, ad::Var x, Activation a) {
  switch (a) {
    case Activation::None: return x;
    case Activation::Relu: return t.relu(x);
    case Activation::Sigmoid: return t.sigmoid(x);
    case Activation::Tanh: return t.tanh(x);
  }
  throw Error("unknown activation");
}

}  // namespace

Nmstpp::BatchOutput Nmstpp::forward(ad::Tape& tape, const BoundParams& bound,
                                    std::span<const SequenceWindow> windows,
                                    bool train_mode,
                                    std::mt19937_64* rng) const {
  if (windows.empty()) throw Error("forward: empty batch");
  const int s = config_.seqlen;
  const int d = config_.d_model();
  const auto b_count = static_cast<Eigen::Index>(windows.size());

  // Stage 1+2a: stack continuous features and embedding ids window-major.
  Eigen::MatrixXd cont(b_count * s, 6);
  std::vector<int> zone_ids, action_ids;
  zone_ids.reserve(windows.size() * s);
  action_ids.reserve(windows.size() * s);
  for (Eigen::Index w = 0; w < b_count; ++w) {
    const auto& hist = windows[static_cast<std::size_t>(w)].history;
    if (hist.rows() != s || hist.cols() != kWindowCols)
      throw Error("forward: window does not match config.seqlen");
    for (int r = 0; r < s; ++r) {
      cont(w * s + r, 0) = hist(r, 0);                    // t (scaled)
      cont.block(w * s + r, 1, 1, 5) = hist.block(r, 3, 1, 5);
      zone_ids.push_back(static_cast<int>(hist(r, 1)));
      action_ids.push_back(static_cast<int>(hist(r, 2)));
    }
  }

  ad::Var x_cont = tape.input(std::move(cont), false);
  ad::Var embedded = tape.concat_cols(
      {affine(tape, x_cont, bound, "cont_dense.W", "cont_dense.b"),
       tape.embedding_rows(bound.at("zone_emb"), zone_ids),
       tape.embedding_rows(bound.at("action_emb"), action_ids)});

  // Stage 2b: positional encoding, tiled across the batch.
  const Eigen::MatrixXd pe = positional_encoding(s, d);
  Eigen::MatrixXd pe_tiled(b_count * s, d);
  for (Eigen::Index w = 0; w < b_count; ++w) pe_tiled.middleRows(w * s, s) = pe;
  ad::Var x = tape.add(embedded, tape.input(std::move(pe_tiled), false));

  // Stage 2c: transformer encoder.
  std::vector<ad::Var> attention(windows.size());
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < config_.n_encoder_layers; ++l) {
    const std::string p = "enc" + std::to_string(l) + ".";
    ad::Var q = affine(tape, x, bound, p + "Wq", p + "bq");
    ad::Var k = affine(tape, x, bound, p + "Wk", p + "bk");
    ad::Var v = affine(tape, x, bound, p + "Wv", p + "bv");
    std::vector<ad::Var> heads;
    heads.reserve(windows.size());
    for (Eigen::Index w = 0; w < b_count; ++w) {
      ad::Var qb = tape.slice_rows(q, static_cast<int>(w * s), s);
      ad::Var kb = tape.slice_rows(k, static_cast<int>(w * s), s);
      ad::Var vb = tape.slice_rows(v, static_cast<int>(w * s), s);
      ad::Var scores = tape.scale(tape.matmul_nt(qb, kb), inv_sqrt_d);
      ad::Var a = tape.softmax_rows(scores);
      attention[static_cast<std::size_t>(w)] = a;
      heads.push_back(tape.matmul(a, vb));
    }
    ad::Var attn = affine(tape, tape.vstack(heads), bound, p + "Wo", p + "bo");
    ad::Var x1 = tape.layer_norm_rows(tape.add(x, attn), bound.at(p + "ln1.g"),
                                      bound.at(p + "ln1.b"));
    ad::Var f = affine(tape, tape.relu(affine(tape, x1, bound, p + "ffn.W1",
                                              p + "ffn.b1")),
                       bound, p + "ffn.W2", p + "ffn.b2");
    x = tape.layer_norm_rows(tape.add(x1, f), bound.at(p + "ln2.g"),
                             bound.at(p + "ln2.b"));
  }

  // Sequence-to-vector reduction: take the last time step of each window,
  // then the post-encoder dense layer.
  std::vector<ad::Var> last_rows;
  last_rows.reserve(windows.size());
  for (Eigen::Index w = 0; w < b_count; ++w)
    last_rows.push_back(tape.row(x, static_cast<int>(w * s + s - 1)));
  ad::Var history =
      affine(tape, tape.vstack(last_rows), bound, "post.W", "post.b");

  // Stage 3: cascaded heads in configured order.
  BatchOutput out;
  out.attention = std::move(attention);
  out.history = history;
  std::map<Head, ad::Var> produced;
  for (Head h : config_.order) {
    std::vector<ad::Var> parts;
    if (config_.dependent)
      for (Head earlier : config_.order) {
        if (earlier == h) break;
        parts.push_back(produced.at(earlier));
      }
    parts.push_back(history);
    ad::Var u = parts.size() == 1 ? parts[0] : tape.concat_cols(parts);
    const std::string p = std::string("head_") + to_string(h) + ".";
    for (int l = 0; l < config_.num_hidden_layers(h); ++l) {
      const std::string lp = p + "h" + std::to_string(l) + ".";
      u = activate(tape, affine(tape, u, bound, lp + "W", lp + "b"),
                   config_.activation);
      if (train_mode && config_.dropout > 0.0) {
        if (!rng) throw Error("forward: dropout requires an rng in train mode");
        u = tape.dropout(u, config_.dropout, *rng);
      }
    }
    produced[h] = affine(tape, u, bound, p + "out.W", p + "out.b");
  }
  out.t_hat = produced.at(Head::T);
  out.z_logits = produced.at(Head::Z);
  out.m_logits = produced.at(Head::M);
  return out;
}

Eigen::MatrixXd Nmstpp::embed(const SequenceWindow& window) const {
  ad::Tape tape;
  const auto bound = bind(tape, false);
  const int s = config_.seqlen;
  Eigen::MatrixXd cont(s, 6);
  std::vector<int> zone_ids, action_ids;
  for (int r = 0; r < s; ++r) {
    cont(r, 0) = window.history(r, 0);
    cont.block(r, 1, 1, 5) = window.history.block(r, 3, 1, 5);
    zone_ids.push_back(static_cast<int>(window.history(r, 1)));
    action_ids.push_back(static_cast<int>(window.history(r, 2)));
  }
  ad::Var x_cont = tape.input(std::move(cont), false);
  ad::Var embedded = tape.concat_cols(
      {affine(tape, x_cont, bound, "cont_dense.W", "cont_dense.b"),
       tape.embedding_rows(bound.at("zone_emb"), zone_ids),
       tape.embedding_rows(bound.at("action_emb"), action_ids)});
  return tape.value(embedded);
}

Nmstpp::Encoded Nmstpp::encode(const SequenceWindow& window) const {
  ad::Tape tape;
  const auto bound = bind(tape, false);
  const SequenceWindow* w = &window;
  const auto out = forward(tape, bound, std::span(w, 1), false, nullptr);
  Encoded enc;
  enc.history = tape.value(out.history).row(0).transpose();
  enc.attention = tape.value(out.attention[0]);
  return enc;
}

ForecastOutput Nmstpp::forecast(const SequenceWindow& window) const {
  return forecast_with_attention(window).first;
}

std::pair<ForecastOutput, Eigen::MatrixXd> Nmstpp::forecast_with_attention(
    const SequenceWindow& window) const {
  ad::Tape tape;
  const auto bound = bind(tape, false);
  const SequenceWindow* w = &window;
  const auto out = forward(tape, bound, std::span(w, 1), false, nullptr);
  ForecastOutput fc;
  fc.t_hat = tape.value(out.t_hat)(0, 0);
  fc.z_logits = tape.value(out.z_logits).row(0).transpose();
  fc.m_logits = tape.value(out.m_logits).row(0).transpose();
  return {std::move(fc), tape.value(out.attention[0])};
}

std::vector<ForecastOutput> Nmstpp::forecast_batch(
    std::span<const SequenceWindow> windows, std::size_t batch_size,
    std::vector<Eigen::RowVectorXd>* attention_last_rows) const {
  std::vector<ForecastOutput> result;
  result.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, windows.size() - start);
    ad::Tape tape;
    const auto bound = bind(tape, false);
    const auto out =
        forward(tape, bound, windows.subspan(start, n), false, nullptr);
    const auto& t_hat = tape.value(out.t_hat);
    const auto& z = tape.value(out.z_logits);
    const auto& m = tape.value(out.m_logits);
    for (std::size_t i = 0; i < n; ++i) {
      ForecastOutput fc;
      const auto r = static_cast<Eigen::Index>(i);
      fc.t_hat = t_hat(r, 0);
      fc.z_logits = z.row(r).transpose();
      fc.m_logits = m.row(r).transpose();
      result.push_back(std::move(fc));
      if (attention_last_rows)
        attention_last_rows->push_back(
            tape.value(out.attention[i]).row(config_.seqlen - 1));
    }
  }
  return result;
}

namespace {

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["seqlen"] = c.seqlen;
  j["zone_emb_dim"] = c.zone_emb_dim;
  j["action_emb_dim"] = c.action_emb_dim;
  j["continuous_dense_dim"] = c.continuous_dense_dim;
  j["dim_feedforward"] = c.dim_feedforward;
  j["history_dim"] = c.history_dim;
  j["order"] = order_to_string(c.order);
  j["num_layers_t"] = c.num_layers_t;
  j["num_layers_z"] = c.num_layers_z;
  j["num_layers_m"] = c.num_layers_m;
  j["head_hidden_dim"] = c.head_hidden_dim;
  j["activation"] = to_string(c.activation);
  j["dropout"] = c.dropout;
  j["dependent"] = c.dependent;
  j["n_encoder_layers"] = c.n_encoder_layers;
  j["n_heads"] = c.n_heads;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.seqlen = j.at("seqlen").get<int>();
  c.zone_emb_dim = j.at("zone_emb_dim").get<int>();
  c.action_emb_dim = j.at("action_emb_dim").get<int>();
  c.continuous_dense_dim = j.at("continuous_dense_dim").get<int>();
  c.dim_feedforward = j.at("dim_feedforward").get<int>();
  c.history_dim = j.at("history_dim").get<int>();
  const auto order = order_from_string(j.at("order").get<std::string>());
  if (!order) throw Error("checkpoint: bad head order");
  c.order = *order;
  c.num_layers_t = j.at("num_layers_t").get<int>();
  c.num_layers_z = j.at("num_layers_z").get<int>();
  c.num_layers_m = j.at("num_layers_m").get<int>();
  c.head_hidden_dim = j.at("head_hidden_dim").get<int>();
  const auto act = activation_from_string(j.at("activation").get<std::string>());
  if (!act) throw Error("checkpoint: bad activation");
  c.activation = *act;
  c.dropout = j.at("dropout").get<double>();
  c.dependent = j.at("dependent").get<bool>();
  c.n_encoder_layers = j.at("n_encoder_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const Nmstpp& model, double t_scale,
                     std::uint64_t zone_map_hash, std::uint64_t config_hash,
                     const std::string& path) {
  nlohmann::ordered_json j;
  j["tool"] = "nmstpp";
  j["version"] = kVersion;
  j["format"] = 1;
  j["config_hash"] = io::hex64(config_hash);
  j["t_scale"] = t_scale;
  j["zone_map_hash"] = io::hex64(zone_map_hash);
  j["config"] = config_to_json(model.config());
  nlohmann::ordered_json tensors;
  for (const auto& [name, t] : model.params()) {
    nlohmann::ordered_json entry;
    entry["rows"] = t.rows();
    entry["cols"] = t.cols();
    std::vector<double> data(t.size());
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c)
        data[static_cast<std::size_t>(r * t.cols() + c)] = t(r, c);
    entry["data"] = std::move(data);
    tensors[name] = std::move(entry);
  }
  j["params"] = std::move(tensors);
  io::write_text_atomic(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint: invalid JSON in " + path + ": " + e.what());
  }
  Checkpoint ckpt;
  try {
    if (j.at("format").get<int>() != 1)
      throw Error("checkpoint: unsupported format version");
    ckpt.config = config_from_json(j.at("config"));
    ckpt.t_scale = j.at("t_scale").get<double>();
    ckpt.zone_map_hash =
        std::stoull(j.at("zone_map_hash").get<std::string>(), nullptr, 16);

    Nmstpp expected(ckpt.config);  // derives the tensor shapes
    const auto& params_json = j.at("params");
    for (const auto& [name, tensor] : expected.params()) {
      if (!params_json.contains(name))
        throw Error("checkpoint: missing tensor " + name);
      const auto& entry = params_json.at(name);
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      if (rows != tensor.rows() || cols != tensor.cols())
        throw Error("checkpoint: tensor " + name +
                    " shape mismatch with config");
      const auto data = entry.at("data").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw Error("checkpoint: tensor " + name + " data length mismatch");
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
          m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
      expected.params().at(name) = std::move(m);
    }
    if (params_json.size() != expected.params().size())
      throw Error("checkpoint: unexpected extra tensors");
    ckpt.params = expected.params();
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint: " + std::string(e.what()));
  }
  return ckpt;
}

}  // namespace nmstpp::model
