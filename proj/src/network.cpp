#include "ckg/network.hpp"

#include <nlohmann/json.hpp>

#include "ckg/error.hpp"
#include "ckg/rng.hpp"

namespace ckg {

std::string to_string(HeadKind h) {
  switch (h) {
    case HeadKind::NodeBinary: return "node_binary";
    case HeadKind::NodeClassifier: return "node_classifier";
    case HeadKind::GraphRegressor: return "graph_regressor";
    case HeadKind::GraphClassifier: return "graph_classifier";
  }
  return "node_binary";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "node_binary") return HeadKind::NodeBinary;
  if (s == "node_classifier") return HeadKind::NodeClassifier;
  if (s == "graph_regressor") return HeadKind::GraphRegressor;
  if (s == "graph_classifier") return HeadKind::GraphClassifier;
  throw Error(ErrorCode::InvalidArgument, "unknown head '" + s + "'");
}

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::None: return "none";
    case Pooling::Sum: return "sum";
    case Pooling::Mean: return "mean";
  }
  return "none";
}

Pooling pooling_from_string(const std::string& s) {
  if (s == "none") return Pooling::None;
  if (s == "sum") return Pooling::Sum;
  if (s == "mean") return Pooling::Mean;
  throw Error(ErrorCode::InvalidArgument, "unknown pooling '" + s + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
  if (num_blocks < 1) fail("num_blocks must be at least 1");
  if (hidden_dim < 1 || kernel_hidden_dim < 1) fail("widths must be positive");
  if (node_attr_dim < 0 || edge_attr_dim < 0) fail("attribute widths must be non-negative");
  if (pe_k < 1) fail("pe_k must be at least 1");
  if (pe_kind != PEKind::RRWP && pe_k != 1) fail("SPD and RD encodings have width 1");
  if (kernel_blocks < 0) fail("kernel_blocks must be non-negative");
  for (double p : {dropout, kernel_dropout, mlp_dropout})
    if (p < 0.0 || p >= 1.0) fail("dropout outside [0, 1)");
  const bool node_head = head == HeadKind::NodeBinary || head == HeadKind::NodeClassifier;
  if (node_head != (pooling == Pooling::None)) fail("pooling must be none exactly for node heads");
  if (num_classes < 1) fail("num_classes must be positive");
}

Eigen::Index ModelConfig::pe_width() const { return static_cast<Eigen::Index>(pe_k); }

Eigen::Index ModelConfig::output_dim() const {
  return head == HeadKind::NodeBinary || head == HeadKind::GraphRegressor ? 1 : num_classes;
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["num_blocks"] = c.num_blocks;
  j["hidden_dim"] = c.hidden_dim;
  j["node_attr_dim"] = c.node_attr_dim;
  j["edge_attr_dim"] = c.edge_attr_dim;
  j["pe_kind"] = to_string(c.pe_kind);
  j["pe_k"] = c.pe_k;
  j["rescale_pe"] = c.rescale_pe;
  j["standardize_pe"] = c.standardize_pe;
  j["support"] = c.support.kind == SupportMode::Kind::Global
                     ? nlohmann::json("global")
                     : nlohmann::json({{"k_hop", c.support.hops}});
  j["kernel_hidden_dim"] = c.kernel_hidden_dim;
  j["kernel_blocks"] = c.kernel_blocks;
  j["kernel_norm"] = to_string(c.kernel_norm);
  j["kernel_activation"] = ad::to_string(c.kernel_activation);
  j["constraint"] = to_string(c.constraint);
  j["kernel_dropout"] = c.kernel_dropout;
  j["mlp_dropout"] = c.mlp_dropout;
  j["scaler"] = to_string(c.scaler);
  j["aggregation"] = to_string(c.aggregation);
  j["norm"] = to_string(c.norm);
  j["residual"] = c.residual;
  j["use_ffn"] = c.use_ffn;
  j["block_activation"] = ad::to_string(c.block_activation);
  j["ffn_activation"] = ad::to_string(c.ffn_activation);
  j["dropout"] = c.dropout;
  j["head"] = to_string(c.head);
  j["num_classes"] = c.num_classes;
  j["pooling"] = to_string(c.pooling);
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "model config must be an object");
  ModelConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "num_blocks") c.num_blocks = v.get<int>();
      else if (key == "hidden_dim") c.hidden_dim = v.get<Eigen::Index>();
      else if (key == "node_attr_dim") c.node_attr_dim = v.get<Eigen::Index>();
      else if (key == "edge_attr_dim") c.edge_attr_dim = v.get<Eigen::Index>();
      else if (key == "pe_kind") c.pe_kind = pe_kind_from_string(v.get<std::string>());
      else if (key == "pe_k") c.pe_k = v.get<std::size_t>();
      else if (key == "rescale_pe") c.rescale_pe = v.get<bool>();
      else if (key == "standardize_pe") c.standardize_pe = v.get<bool>();
      else if (key == "support") {
        if (v.is_string() && v.get<std::string>() == "global") c.support = SupportMode::global();
        else if (v.is_object() && v.size() == 1 && v.contains("k_hop"))
          c.support = SupportMode::k_hop(v.at("k_hop").get<std::size_t>());
        else throw Error(ErrorCode::ParseError, "support must be \"global\" or {\"k_hop\": k}");
      }
      else if (key == "kernel_hidden_dim") c.kernel_hidden_dim = v.get<Eigen::Index>();
      else if (key == "kernel_blocks") c.kernel_blocks = v.get<int>();
      else if (key == "kernel_norm") c.kernel_norm = norm_kind_from_string(v.get<std::string>());
      else if (key == "kernel_activation")
        c.kernel_activation = ad::activation_from_string(v.get<std::string>());
      else if (key == "constraint") c.constraint = constraint_from_string(v.get<std::string>());
      else if (key == "kernel_dropout") c.kernel_dropout = v.get<double>();
      else if (key == "mlp_dropout") c.mlp_dropout = v.get<double>();
      else if (key == "scaler") c.scaler = scaler_kind_from_string(v.get<std::string>());
      else if (key == "aggregation") c.aggregation = aggregation_from_string(v.get<std::string>());
      else if (key == "norm") c.norm = norm_kind_from_string(v.get<std::string>());
      else if (key == "residual") c.residual = v.get<bool>();
      else if (key == "use_ffn") c.use_ffn = v.get<bool>();
      else if (key == "block_activation")
        c.block_activation = ad::activation_from_string(v.get<std::string>());
      else if (key == "ffn_activation")
        c.ffn_activation = ad::activation_from_string(v.get<std::string>());
      else if (key == "dropout") c.dropout = v.get<double>();
      else if (key == "head") c.head = head_kind_from_string(v.get<std::string>());
      else if (key == "num_classes") c.num_classes = v.get<Eigen::Index>();
      else if (key == "pooling") c.pooling = pooling_from_string(v.get<std::string>());
      else throw Error(ErrorCode::UnknownField, "model." + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw Error(ErrorCode::ParseError, e.what());
    throw;
  }
  c.validate();
  return c;
}

GraphInputs prepare_inputs(const Graph& g, const ModelConfig& c) {
  const auto n = g.num_nodes();
  if (g.node_attrs() && static_cast<Eigen::Index>(g.node_attr_dim()) != c.node_attr_dim)
    throw Error(ErrorCode::ConfigMismatch, "graph node attributes have width " +
                                               std::to_string(g.node_attr_dim()) + ", model expects " +
                                               std::to_string(c.node_attr_dim));
  if (g.edge_attrs() && static_cast<Eigen::Index>(g.edge_attr_dim()) != c.edge_attr_dim)
    throw Error(ErrorCode::ConfigMismatch, "graph edge attributes have width " +
                                               std::to_string(g.edge_attr_dim()) + ", model expects " +
                                               std::to_string(c.edge_attr_dim));

  PseudoCoordinateField field = [&] {
    switch (c.pe_kind) {
      case PEKind::SPD: return spd_field(g);
      case PEKind::RD: return rd_field(g);
      case PEKind::RRWP: break;
    }
    return rrwp(g, c.pe_k, c.rescale_pe);
  }();
  if (c.standardize_pe) field.standardize();
  const auto support = make_support(g, c.support, &field);

  GraphInputs in;
  in.n = n;
  in.degrees = degree_vector(g);
  in.pairs = build_pair_features(g, field, support, c.edge_attr_dim);
  const auto k = static_cast<Eigen::Index>(field.width());
  in.node_input = ad::Matrix::Zero(static_cast<Eigen::Index>(n), c.node_attr_dim + k);
  if (g.node_attrs()) in.node_input.leftCols(c.node_attr_dim) = *g.node_attrs();
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = field.at(i, i);
    for (Eigen::Index t = 0; t < k; ++t)
      in.node_input(static_cast<Eigen::Index>(i), c.node_attr_dim + t) = p[t];
  }
  return in;
}

CKGCN::CKGCN(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  Rng init(init_seed);
  const auto d = config_.hidden_dim;
  stem_ = Linear::create(store_, "stem", config_.node_attr_dim + config_.pe_width(), d, init);
  for (int b = 0; b < config_.num_blocks; ++b) {
    const auto name = "layer" + std::to_string(b);
    ConvConfig cc;
    cc.in_dim = d;
    cc.out_dim = d;
    cc.kernel.in_dim = config_.edge_attr_dim + config_.pe_width();
    cc.kernel.hidden_dim = config_.kernel_hidden_dim;
    cc.kernel.out_dim = d;
    cc.kernel.num_mlp_blocks = config_.kernel_blocks;
    cc.kernel.norm = config_.kernel_norm;
    cc.kernel.activation = config_.kernel_activation;
    cc.kernel.constraint = config_.constraint;
    cc.kernel.kernel_dropout = config_.kernel_dropout;
    cc.kernel.mlp_dropout = config_.mlp_dropout;
    cc.scaler = config_.scaler;
    cc.aggregation = config_.aggregation;

    Block block;
    block.conv = std::make_unique<ConvLayer>(store_, name + ".conv", cc, init);
    block.norm1 = NormLayer(store_, name + ".norm1", config_.norm, d);
    if (config_.use_ffn) {
      block.ffn_in = Linear::create(store_, name + ".ffn.fc1", d, 2 * d, init);
      block.ffn_out = Linear::create(store_, name + ".ffn.fc2", 2 * d, d, init);
      block.norm2 = NormLayer(store_, name + ".norm2", config_.norm, d);
    }
    blocks_.push_back(std::move(block));
  }
  head_ = Linear::create(store_, "head", d, config_.output_dim(), init);
}

ad::Tensor CKGCN::stem(ad::Tape& tape, const GraphInputs& in) {
  if (in.node_input.cols() != stem_.in_dim())
    throw Error(ErrorCode::WidthMismatch, "stem expects " + std::to_string(stem_.in_dim()) +
                                              " input channels, got " +
                                              std::to_string(in.node_input.cols()));
  return stem_(tape, tape.constant(in.node_input));
}

ad::Tensor CKGCN::ffn(ad::Tape& tape, std::size_t b, const ad::Tensor& x) {
  auto& block = blocks_.at(b);
  if (block.ffn_in.weight == nullptr) throw Error(ErrorCode::ConfigMismatch, "FFN disabled");
  return block.ffn_out(tape, ad::activation(block.ffn_in(tape, x), config_.ffn_activation));
}

ad::Tensor CKGCN::block(ad::Tape& tape, std::size_t b, const ad::Tensor& x, const GraphInputs& in,
                        const ForwardContext& ctx) {
  auto& blk = blocks_.at(b);
  auto drop = [&](const ad::Tensor& t) {
    if (!ctx.training || config_.dropout <= 0.0) return t;
    return ad::dropout(t, config_.dropout, *ctx.rng, true);
  };
  auto h = (*blk.conv)(tape, x, in.pairs, in.degrees, ctx);
  h = drop(ad::activation(h, config_.block_activation));
  if (config_.residual) h = ad::add(x, h);
  h = blk.norm1(tape, h, ctx);
  if (!config_.use_ffn) return h;
  auto f = drop(ffn(tape, b, h));
  if (config_.residual) f = ad::add(h, f);
  return blk.norm2(tape, f, ctx);
}

ad::Tensor CKGCN::forward(ad::Tape& tape, const GraphInputs& in, const ForwardContext& ctx) {
  if (static_cast<Eigen::Index>(in.n) != in.node_input.rows() ||
      in.pairs.features.cols() != config_.edge_attr_dim + config_.pe_width())
    throw Error(ErrorCode::ConfigMismatch, "inputs were prepared for another configuration");
  auto h = stem(tape, in);
  for (std::size_t b = 0; b < blocks_.size(); ++b) h = block(tape, b, h, in, ctx);
  switch (config_.pooling) {
    case Pooling::Sum: h = ad::sum_rows(h); break;
    case Pooling::Mean: h = ad::mean_rows(h); break;
    case Pooling::None: break;
  }
  return head_(tape, h);
}

ad::Tensor CKGCN::forward(ad::Tape& tape, const Graph& g, const ForwardContext& ctx) {
  return forward(tape, prepare_inputs(g, config_), ctx);
}

nlohmann::json CKGCN::checkpoint() const {
  return {{"config", model_config_to_json(config_)}, {"params", store_.to_json()}};
}

void CKGCN::load_checkpoint(const nlohmann::json& j) {
  if (!j.contains("config") || !j.contains("params"))
    throw Error(ErrorCode::ParseError, "checkpoint needs \"config\" and \"params\"");
  if (j.at("config") != model_config_to_json(config_))
    throw Error(ErrorCode::ConfigMismatch, "checkpoint written for a different model config");
  store_.load_json(j.at("params"));
}

GCNNet::GCNNet(GCNConfig config, std::uint64_t init_seed) : config_(config) {
  if (config_.num_layers < 1) throw Error(ErrorCode::InvalidArgument, "GCN needs a layer");
  Rng init(init_seed);
  auto width = config_.in_dim;
  for (int l = 0; l < config_.num_layers; ++l) {
    layers_.push_back(Linear::create(store_, "gcn" + std::to_string(l), width,
                                     config_.hidden_dim, init));
    width = config_.hidden_dim;
  }
  head_ = Linear::create(store_, "head", width, config_.out_dim, init);
}

ad::Tensor GCNNet::forward(ad::Tape& tape, const ad::Matrix& x, const DenseMatrix& a_hat) {
  auto h = tape.constant(x);
  for (const auto& layer : layers_) h = ad::relu(gcn_conv(tape, h, layer, a_hat));
  return head_(tape, h);
}

}  // namespace ckg
