// Copyright 2026 The popnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "popnet/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>

#include <Eigen/Core>

#include "popnet/attributes.hpp"
#include "popnet/csv.hpp"
#include "popnet/deepwalk.hpp"
#include "popnet/dine.hpp"
#include "popnet/embedding.hpp"
#include "popnet/graph.hpp"
#include "popnet/line.hpp"
#include "popnet/predict.hpp"
#include "popnet/shapley.hpp"
#include "popnet/synth.hpp"
#include "popnet/utility.hpp"
#include "text_util.hpp"

#ifndef POPNET_VERSION
#define POPNET_VERSION "unknown"
#endif

namespace popnet {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 9> kStageNames{{
    {Stage::synth, "synth"},
    {Stage::collapse, "collapse"},
    {Stage::embed_deepwalk, "embed-deepwalk"},
    {Stage::embed_line, "embed-line"},
    {Stage::dine, "dine"},
    {Stage::predict, "predict"},
    {Stage::shapley, "shapley"},
    {Stage::utility, "utility"},
    {Stage::report, "report"},
}};

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

std::uint64_t file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Json file_record(const fs::path& path) {
  Json r = Json::object();
  r["path"] = path.string();
  r["bytes"] = fs::file_size(path);
  r["fnv1a"] = hex64(file_digest(path));
  return r;
}

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

// Row counts must agree with the header width.
void validate_delimited(const fs::path& path, char sep) {
  if (sep == ',') {
    const auto table = read_csv(path);
    if (table.empty()) throw DataError(path.string() + ": missing header row");
    for (std::size_t r = 1; r < table.size(); ++r)
      if (table[r].size() != table[0].size())
        throw DataError(path.string() + ": row " + std::to_string(r + 1) + " has the wrong width");
    return;
  }
  std::ifstream in(path, std::ios::binary);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header row");
  const auto width = std::count(line.begin(), line.end(), sep);
  for (std::size_t r = 2; std::getline(in, line); ++r)
    if (std::count(line.begin(), line.end(), sep) != width)
      throw DataError(path.string() + ": row " + std::to_string(r) + " has the wrong width");
}

void validate_artifact(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pneb") {
    if (!read_embedding(path).all_finite()) throw NumericalError(path.string() + ": non-finite values");
  } else if (ext == ".pngc") {
    read_graph_cache(path);
  } else if (ext == ".pdin") {
    if (!read_dine_model(path).all_finite()) throw NumericalError(path.string() + ": non-finite values");
  } else if (ext == ".csv") {
    validate_delimited(path, ',');
  } else if (ext == ".tsv") {
    validate_delimited(path, '\t');
  }
}

class StageRun {
 public:
  StageRun(Stage stage, const Json& config)
      : stage_(stage),
        config_(config),
        out_(config["paths"]["out"].get<std::string>()),
        seed_(config["seed"].get<std::uint64_t>()),
        threads_(static_cast<unsigned>(std::max<std::int64_t>(1, config["threads"].get<std::int64_t>()))),
        started_(std::chrono::system_clock::now()),
        clock_(std::chrono::steady_clock::now()) {
    if (config["seed"].get<std::int64_t>() < 0) throw ConfigError("config key 'seed' must be non-negative");
    fs::create_directories(out_);
  }

  const Json& cfg(std::string_view section) const { return config_[std::string(section)]; }
  std::uint64_t seed() const { return stage_seed(seed_, stage_); }
  std::uint64_t seed(std::string_view stream) const { return derive_seed(seed(), fnv1a(stream)); }
  unsigned threads() const { return threads_; }
  const fs::path& out() const { return out_; }

  /// Default location of an upstream artifact, checked for existence.
  fs::path input(const std::string& file, Stage producer) {
    return require(out_ / file, producer, {});
  }

  /// Input that may be redirected by a `paths.<key>` entry.
  fs::path input_path(const std::string& key, const std::string& file, Stage producer) {
    const auto configured = config_["paths"][key].get<std::string>();
    if (!configured.empty()) return require(configured, producer, "paths." + key);
    return require(out_ / file, producer, {});
  }

  fs::path output(const std::string& file) {
    artifacts_.push_back(out_ / file);
    return artifacts_.back();
  }

  Json& summary() { return summary_; }

  StageResult finish() {
    for (const auto& a : artifacts_) validate_artifact(a);
    Json m = Json::object();
    m["stage"] = std::string(stage_name(stage_));
    m["seed"] = seed_;
    m["stage_seed"] = seed();
    m["config_hash"] = hex64(config_hash(config_));
    m["config"] = config_;
    Json versions = Json::object();
    versions["popnet"] = POPNET_VERSION;
    versions["eigen"] = eigen_version();
    versions["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    versions["compiler"] = __VERSION__;
    m["versions"] = versions;
    m["inputs"] = Json::array();
    for (const auto& i : inputs_) m["inputs"].push_back(file_record(i));
    m["artifacts"] = Json::array();
    for (const auto& a : artifacts_) m["artifacts"].push_back(file_record(a));
    m["summary"] = summary_;
    m["started_at"] = utc_timestamp(started_);
    m["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();

    StageResult result;
    result.artifacts = artifacts_;
    result.manifest = out_ / (std::string(stage_name(stage_)) + ".manifest.json");
    result.summary = summary_;
    std::ofstream f(result.manifest, std::ios::binary);
    f << m.dump(2) << '\n';
    if (!f) throw DataError("cannot write " + result.manifest.string());
    return result;
  }

 private:
  fs::path require(const fs::path& p, Stage producer, const std::string& key) {
    if (!fs::exists(p)) {
      if (!key.empty()) throw DataError("input file " + p.string() + " (config key '" + key + "') does not exist");
      throw DataError("missing input " + p.string() + "; run `popnet " + std::string(stage_name(producer)) +
                      "` first");
    }
    inputs_.push_back(p);
    return p;
  }

  Stage stage_;
  const Json& config_;
  fs::path out_;
  std::uint64_t seed_;
  unsigned threads_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point clock_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> artifacts_;
  Json summary_ = Json::object();
};

std::size_t as_size(const Json& v, const std::string& key) {
  const auto x = v.get<std::int64_t>();
  if (x < 0) throw ConfigError("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(x);
}

Stage embedding_producer(const std::string& name) {
  if (name == "deepwalk") return Stage::embed_deepwalk;
  if (name == "line") return Stage::embed_line;
  if (name == "dine") return Stage::dine;
  throw ConfigError("unknown embedding '" + name + "' (expected deepwalk, line or dine)");
}

EmbeddingMatrix load_embedding(StageRun& run, const std::string& name) {
  return read_embedding(run.input(name + ".pneb", embedding_producer(name)));
}

void write_node_list(const IdMap& ids, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << "node_id\n";
  for (const auto& id : ids.externals()) out << id << '\n';
  if (!out) throw DataError("cannot write " + path.string());
}

IdMap read_node_list(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string line;
  if (!std::getline(in, line) || detail::chomp(line) != "node_id")
    throw DataError(path.string() + ": expected header 'node_id'");
  IdMap ids;
  while (std::getline(in, line)) {
    const auto id = detail::chomp(line);
    if (ids.contains(id)) throw DataError(path.string() + ": duplicate node id '" + std::string(id) + "'");
    ids.intern(id);
  }
  return ids;
}

CollapsedGraph load_collapsed(StageRun& run) {
  auto g = read_graph_cache(run.input("graph.pngc", Stage::collapse));
  auto ids = read_node_list(run.input("nodes.tsv", Stage::collapse));
  if (ids.size() != g.node_count())
    throw DataError("nodes.tsv lists " + std::to_string(ids.size()) + " ids for a graph of " +
                    std::to_string(g.node_count()) + " nodes");
  g.set_ids(std::move(ids));
  return g;
}

IdMap embedding_ids(const EmbeddingMatrix& e) {
  IdMap ids;
  for (const auto& id : e.ids) ids.intern(id);
  return ids;
}

void check_alignment(const EmbeddingMatrix& e, const IdMap& ids, const std::string& what) {
  if (e.ids != ids.externals())
    throw DataError("embedding rows do not follow the node order of " + what + "; rerun the embedding stages");
}

void maybe_export_tsv(StageRun& run, const Json& section, const EmbeddingMatrix& e, const std::string& stem) {
  if (section["export_tsv"].get<bool>()) write_embedding_tsv(e, run.output(stem + ".tsv"));
}

void run_synth(StageRun& run) {
  const Json& s = run.cfg("synth");
  SynthConfig sc;
  sc.n_persons = as_size(s["n_persons"], "synth.n_persons");
  sc.n_municipalities = as_size(s["n_municipalities"], "synth.n_municipalities");
  sc.grid_side = as_size(s["grid_side"], "synth.grid_side");
  sc.municipality_zipf = s["municipality_zipf"].get<double>();
  sc.household_size_mean = s["household_size_mean"].get<double>();
  sc.school_group_size = as_size(s["school_group_size"], "synth.school_group_size");
  sc.workplace_size = as_size(s["workplace_size"], "synth.workplace_size");
  sc.neighbor_k = as_size(s["neighbor_k"], "synth.neighbor_k");
  sc.commute_probability = s["commute_probability"].get<double>();
  sc.family_link_probability = s["family_link_probability"].get<double>();
  sc.outcome_intercept = s["outcome_intercept"].get<double>();
  sc.not_voted_fraction = s["not_voted_fraction"].get<double>();
  sc.missing_fraction = s["missing_fraction"].get<double>();
  sc.education_levels.clear();
  for (const auto& [name, p] : s["education"].items()) sc.education_levels.push_back({name, p.get<double>()});
  for (std::size_t l = 0; l < kLayerCount; ++l)
    sc.homophily_strength[l] = s["homophily"][std::string(layer_name(static_cast<Layer>(l)))].get<double>();
  sc.outcome_coefficients.clear();
  for (const auto& [key, c] : s["outcome_coefficients"].items()) sc.outcome_coefficients[key] = c.get<double>();

  const Population pop = generate_population(sc, run.seed());
  write_ground_truth(pop, run.output("ground_truth.tsv"));
  write_edge_file(pop.graph, run.output("edges.tsv"));
  write_attribute_file(pop.attributes, run.output("attributes.tsv"));

  std::array<std::size_t, kLayerCount> per_layer{};
  for (const auto& e : pop.graph.edges()) ++per_layer[static_cast<std::size_t>(pop.graph.relations()[e.relation].layer)];
  Json layers = Json::object();
  for (std::size_t l = 0; l < kLayerCount; ++l) layers[std::string(layer_name(static_cast<Layer>(l)))] = per_layer[l];
  std::array<std::size_t, kOutcomeCount> outcomes{};
  for (auto o : pop.outcome) ++outcomes[static_cast<std::size_t>(o)];
  Json labels = Json::object();
  for (std::size_t o = 0; o < kOutcomeCount; ++o) labels[std::string(outcome_name(static_cast<Outcome>(o)))] = outcomes[o];
  run.summary()["persons"] = pop.graph.node_count();
  run.summary()["raw_edges"] = pop.graph.edge_count();
  run.summary()["edges_per_layer"] = layers;
  run.summary()["outcomes"] = labels;
}

void run_collapse(StageRun& run) {
  const auto mg = load_edge_file(run.input_path("edges", "edges.tsv", Stage::synth));
  const auto g = symmetrize_collapse(mg);
  write_graph_cache(g, run.output("graph.pngc"));
  write_node_list(g.ids(), run.output("nodes.tsv"));
  run.summary()["nodes"] = g.node_count();
  run.summary()["edges"] = g.edge_count();
  run.summary()["relation_types"] = g.relations().size();
}

void run_deepwalk(StageRun& run) {
  const Json& w = run.cfg("walk");
  const Json& d = run.cfg("deepwalk");
  const auto g = load_collapsed(run);
  WalkConfig wc;
  wc.walks_per_node = as_size(w["walks_per_node"], "walk.walks_per_node");
  wc.walk_length = as_size(w["walk_length"], "walk.walk_length");
  wc.seed = run.seed("walk");
  wc.threads = run.threads();
  SgnsConfig sc;
  sc.dim = as_size(d["dim"], "deepwalk.dim");
  sc.window = as_size(d["window"], "deepwalk.window");
  sc.epochs = as_size(d["epochs"], "deepwalk.epochs");
  sc.lr_initial = d["lr_initial"].get<double>();
  sc.lr_min = d["lr_min"].get<double>();
  sc.negatives = as_size(d["negatives"], "deepwalk.negatives");
  sc.unigram_exponent = d["unigram_exponent"].get<double>();
  sc.seed = run.seed("sgns");
  sc.threads = run.threads();
  wc.validate();
  sc.validate();

  const auto corpus = generate_walks(g, wc);
  const auto model = train_sgns(corpus, g.node_count(), sc);
  auto e = model.embedding();
  e.ids = g.ids().externals();
  write_embedding(e, run.output("deepwalk.pneb"));
  maybe_export_tsv(run, d, e, "deepwalk");
  run.summary()["nodes"] = e.rows;
  run.summary()["dim"] = e.dim;
  run.summary()["walks"] = corpus.walk_count();
  run.summary()["pairs_processed"] = model.pairs_processed;
  run.summary()["reproducible"] = run.threads() == 1;
}

void run_line(StageRun& run) {
  const Json& l = run.cfg("line");
  const auto g = load_collapsed(run);
  LineConfig lc;
  lc.dim_per_order = as_size(l["dim_per_order"], "line.dim_per_order");
  lc.lr = l["lr"].get<double>();
  lc.epochs = as_size(l["epochs"], "line.epochs");
  lc.negatives = as_size(l["negatives"], "line.negatives");
  lc.unigram_exponent = l["unigram_exponent"].get<double>();
  lc.batch_size = as_size(l["batch_size"], "line.batch_size");
  lc.threads = run.threads();
  lc.validate();
  const auto order = l["order"].get<std::string>();
  if (order != "first" && order != "second" && order != "both")
    throw ConfigError("config key 'line.order' must be first, second or both");

  EmbeddingMatrix e;
  if (order == "first" || order == "both") {
    lc.seed = run.seed("first");
    e = train_line_order(g, LineOrder::first, lc);
  }
  if (order == "second" || order == "both") {
    lc.seed = run.seed("second");
    auto second = train_line_order(g, LineOrder::second, lc);
    e = order == "both" ? concat_orders(e, second) : std::move(second);
  }
  e.ids = g.ids().externals();
  write_embedding(e, run.output("line.pneb"));
  maybe_export_tsv(run, l, e, "line");
  run.summary()["nodes"] = e.rows;
  run.summary()["dim"] = e.dim;
}

void run_dine(StageRun& run) {
  const Json& c = run.cfg("dine");
  const auto input = c["input"].get<std::string>();
  if (input != "deepwalk" && input != "line") throw ConfigError("config key 'dine.input' must be deepwalk or line");
  const auto source = load_embedding(run, input);
  const auto g = load_collapsed(run);
  check_alignment(source, g.ids(), "graph.pngc");

  DineConfig dc;
  dc.lr = c["lr"].get<double>();
  const auto optimizer = c["optimizer"].get<std::string>();
  if (optimizer == "sgd") {
    dc.optimizer = DineOptimizer::sgd;
  } else if (optimizer == "adam") {
    dc.optimizer = DineOptimizer::adam;
  } else {
    throw ConfigError("config key 'dine.optimizer' must be sgd or adam");
  }
  dc.batch_size = as_size(c["batch_size"], "dine.batch_size");
  dc.epochs = as_size(c["epochs"], "dine.epochs");
  dc.noise_sigma = c["noise_sigma"].get<double>();
  dc.seed = run.seed();
  dc.validate();

  const auto result = train_dine(source.to_matrix(), g, dc);
  const auto e = transformed_embedding(result.H, source);
  write_embedding(e, run.output("dine.pneb"));
  write_dine_model(result.model, run.output("dine.pdin"));
  CsvWriter h(run.output("dine_history.csv"));
  h.row({"epoch", "total", "mse", "orth", "size", "degenerate_size"});
  for (std::size_t ep = 0; ep < result.history.size(); ++ep) {
    const auto& l = result.history[ep];
    h.row({std::to_string(ep), format_real(l.total), format_real(l.mse), format_real(l.orth), format_real(l.size),
           l.degenerate_size ? "true" : "false"});
  }
  h.close();
  maybe_export_tsv(run, c, e, "dine");
  run.summary()["initial_loss"] = result.history.front().total;
  run.summary()["final_loss"] = result.history.back().total;
  run.summary()["offdiag_mass"] = orthogonality_offdiag_mass(result.H, g);
}

std::string relation_set(const CollapsedGraph& g, std::size_t e) {
  std::string s;
  for (auto r : g.edge_relations(e)) {
    if (!s.empty()) s += ';';
    s += g.relations()[r].label();
  }
  return s;
}

void run_utility(StageRun& run) {
  const Json& u = run.cfg("utility");
  const auto emb = load_embedding(run, u["embedding"].get<std::string>());
  std::size_t d = 0;
  const auto configured = u["dimension"].get<std::int64_t>();
  if (configured >= 0) {
    d = static_cast<std::size_t>(configured);
  } else {
    d = select_dimension(read_shapley_importance(run.input("shapley.csv", Stage::shapley)));
  }
  if (d >= emb.dim)
    throw ConfigError("utility dimension " + std::to_string(d) + " is outside the embedding width " +
                      std::to_string(emb.dim));

  const auto g = symmetrize_collapse(load_edge_file(run.input_path("edges", "edges.tsv", Stage::synth)));
  check_alignment(emb, g.ids(), "the edge file");
  const auto attrs = load_attribute_file(run.input_path("attributes", "attributes.tsv", Stage::synth)).aligned_to(g.ids());

  const auto scores = compute_utility(emb.to_matrix(), g, d, run.threads());

  CsvWriter eu(run.output("edge_utility.csv"));
  eu.row({"source", "target", "relations", "utility"});
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    eu.row({g.ids().external(g.edge_source(e)), g.ids().external(g.edge_target(e)), relation_set(g, e),
            format_real(scores.per_edge[e])});
  eu.close();

  CsvWriter ns(run.output("node_strength.csv"));
  ns.row({"node_id", "strength"});
  for (std::size_t v = 0; v < g.node_count(); ++v)
    ns.row({g.ids().external(v), format_real(scores.per_node_strength[v])});
  ns.close();

  const auto group_key = u["group_attribute"].get<std::string>();
  if (!attrs.has_column(group_key)) throw ConfigError("utility.group_attribute '" + group_key + "' is not an attribute");
  const auto cells = attrs.categorical(group_key);
  std::vector<std::string> names;
  for (std::size_t v = 0; v < cells.size(); ++v) {
    if (!cells[v]) throw DataError("node " + g.ids().external(v) + " has no " + group_key + " value");
    names.push_back(*cells[v]);
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<std::uint32_t> group(cells.size());
  for (std::size_t v = 0; v < cells.size(); ++v)
    group[v] = static_cast<std::uint32_t>(std::lower_bound(names.begin(), names.end(), *cells[v]) - names.begin());
  const auto pairs = group_utility(scores.per_edge, g, group);
  const auto strength = group_strength(pairs);

  CsvWriter gu(run.output("group_utility.csv"));
  gu.row({"group_m", "group_n", "gamma", "edges"});
  for (const auto& p : pairs) gu.row({names[p.m], names[p.n], format_real(p.gamma), std::to_string(p.edges)});
  gu.close();
  CsvWriter gs(run.output("group_strength.csv"));
  gs.row({"group", "strength"});
  for (const auto& [m, q] : strength) gs.row({names[m], format_real(q)});
  gs.close();

  CsvWriter cr(run.output("correlations.csv"));
  cr.row({"variable", "r", "pairs"});
  for (const auto& var : u["correlate"]) {
    const auto name = var.get<std::string>();
    if (!attrs.has_column(name)) throw ConfigError("utility.correlate entry '" + name + "' is not an attribute");
    const auto c = pearson(scores.per_node_strength, attrs.numeric(name));
    cr.row({name, format_real(c.r), std::to_string(c.pairs)});
  }
  cr.close();

  const auto by_rel = aggregate_by_relation(scores.per_edge, g);
  CsvWriter rs(run.output("relation_utility.csv"));
  rs.row({"relation", "layer", "mean", "sd", "count"});
  for (std::size_t r = 0; r < by_rel.size(); ++r)
    rs.row({g.relations()[r].label(), std::string(layer_name(g.relations()[r].layer)), format_real(by_rel[r].mean),
            format_real(by_rel[r].sd), std::to_string(by_rel[r].count)});
  rs.close();

  CsvWriter as(run.output("attribute_strength.csv"));
  as.row({"attribute", "category", "mean", "sd", "count"});
  for (const auto& var : u["aggregate"]) {
    const auto name = var.get<std::string>();
    if (!attrs.has_column(name)) throw ConfigError("utility.aggregate entry '" + name + "' is not an attribute");
    for (const auto& [cat, s] : aggregate_by_attribute(scores.per_node_strength, attrs.categorical(name)))
      as.row({name, cat, format_real(s.mean), format_real(s.sd), std::to_string(s.count)});
  }
  as.close();

  run.summary()["dimension"] = d;
  run.summary()["edges"] = g.edge_count();
  run.summary()["groups"] = names.size();
}

struct LabeledRows {
  EmbeddingMatrix embedding;
  AttributeTable attributes;
  std::vector<int> labels;
  std::vector<std::string> class_names;
};

LabeledRows labeled_rows(StageRun& run, const std::string& embedding) {
  LabeledRows r;
  r.embedding = load_embedding(run, embedding);
  const IdMap ids = embedding_ids(r.embedding);
  r.attributes = load_attribute_file(run.input_path("attributes", "attributes.tsv", Stage::synth)).aligned_to(ids);
  const auto outcomes = load_ground_truth(run.input_path("ground_truth", "ground_truth.tsv", Stage::synth), ids);
  for (auto o : outcomes) r.labels.push_back(static_cast<int>(o));
  for (std::size_t o = 0; o < kOutcomeCount; ++o) r.class_names.emplace_back(outcome_name(static_cast<Outcome>(o)));
  return r;
}

FeatureMatrix features_for(const LabeledRows& rows, const RowMatrix& H, FeatureSet set) {
  const bool emb = set != FeatureSet::covariates;
  const bool cov = set != FeatureSet::embeddings;
  return build_features(emb ? &H : nullptr, cov ? &rows.attributes : nullptr, rows.labels, rows.class_names, set);
}

CvOptions cv_options(StageRun& run) {
  const Json& p = run.cfg("predict");
  CvOptions o;
  o.outer_folds = static_cast<int>(as_size(p["outer_folds"], "predict.outer_folds"));
  o.inner_folds = static_cast<int>(as_size(p["inner_folds"], "predict.inner_folds"));
  if (o.outer_folds < 2 || o.inner_folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  o.budget = as_size(p["budget"], "predict.budget");
  o.space.l2_min = p["l2_min"].get<double>();
  o.space.l2_max = p["l2_max"].get<double>();
  o.space.k_min = as_size(p["k_min"], "predict.k_min");
  o.space.k_max = as_size(p["k_max"], "predict.k_max");
  o.seed = run.seed();
  o.threads = run.threads();
  return o;
}

void run_predict(StageRun& run) {
  const Json& p = run.cfg("predict");
  const auto rows = labeled_rows(run, p["embedding"].get<std::string>());
  const RowMatrix H = rows.embedding.to_matrix();
  const CvOptions o = cv_options(run);
  std::vector<CvReport> reports;
  Json results = Json::array();
  for (const auto& a : p["algorithms"]) {
    const Algorithm alg = parse_algorithm(a.get<std::string>());
    for (const auto& s : p["feature_sets"]) {
      const FeatureSet set = parse_feature_set(s.get<std::string>());
      reports.push_back(nested_cv(features_for(rows, H, set), alg, o));
      Json r = Json::object();
      r["algorithm"] = std::string(algorithm_name(alg));
      r["feature_set"] = std::string(feature_set_name(set));
      r["mean_macro_auc"] = reports.back().mean;
      r["sd_macro_auc"] = reports.back().sd;
      results.push_back(r);
    }
  }
  if (reports.empty()) throw ConfigError("predict.algorithms and predict.feature_sets must not be empty");
  write_cv_report(reports, run.output("cv_report.csv"));
  run.summary()["rows"] = rows.labels.size();
  run.summary()["results"] = results;
}

void run_shapley(StageRun& run) {
  const Json& s = run.cfg("shapley");
  const auto rows = labeled_rows(run, s["embedding"].get<std::string>());
  const RowMatrix H = rows.embedding.to_matrix();
  const FeatureSet set = parse_feature_set(s["feature_set"].get<std::string>());
  const Algorithm alg = parse_algorithm(s["algorithm"].get<std::string>());
  const FeatureMatrix fm = features_for(rows, H, set);

  const auto target_name = s["target_class"].get<std::string>();
  const auto it = std::find(fm.class_names.begin(), fm.class_names.end(), target_name);
  if (it == fm.class_names.end()) throw DataError("target class '" + target_name + "' does not occur in the labels");
  const int target = static_cast<int>(it - fm.class_names.begin());

  Hyperparameters h{s["l2_inverse"].get<double>(), as_size(s["k"], "shapley.k")};
  if (s["tune"].get<bool>()) {
    CvOptions o = cv_options(run);
    const auto tuned = tune_hyperparameters(fm, alg, o);
    h = tuned.chosen;
    run.summary()["tuning_macro_auc"] = tuned.inner_score;
  }
  const Pipeline pipeline = fit_pipeline(fm, alg, h);

  std::vector<std::size_t> picked(fm.rows());
  std::iota(picked.begin(), picked.end(), std::size_t{0});
  const std::size_t max_rows = as_size(s["max_rows"], "shapley.max_rows");
  if (max_rows > 0 && max_rows < picked.size()) {
    SplitMix64 rng(run.seed("rows"));
    for (std::size_t i = 0; i < max_rows; ++i)
      std::swap(picked[i], picked[i + uniform_below(rng, picked.size() - i)]);
    picked.resize(max_rows);
    std::sort(picked.begin(), picked.end());
  }
  ShapleyOptions so;
  so.n_permutations = as_size(s["n_permutations"], "shapley.n_permutations");
  so.seed = run.seed("permutations");
  so.threads = run.threads();
  const auto report = explain_pipeline(pipeline, fm, fm.subset(picked), target, so);
  write_shapley(report, run.output("shapley.csv"));

  run.summary()["rows_explained"] = picked.size();
  run.summary()["l2_inverse"] = h.l2_inverse;
  run.summary()["k"] = h.k;
  if (set != FeatureSet::covariates) run.summary()["selected_dimension"] = select_dimension(report.importance());
}

double parse_real(const std::string& s, const fs::path& file) {
  double v = 0;
  if (s == "NA") return NAN;
  if (!detail::parse_double(s, v)) throw DataError(file.string() + ": '" + s + "' is not a number");
  return v;
}

std::size_t column(const CsvTable& t, const std::string& name, const fs::path& file) {
  if (t.empty()) throw DataError(file.string() + ": missing header row");
  const auto it = std::find(t[0].begin(), t[0].end(), name);
  if (it == t[0].end()) throw DataError(file.string() + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - t[0].begin());
}

void run_report(StageRun& run) {
  const double percentile = run.cfg("report")["percentile"].get<double>();
  if (!(percentile >= 50.0 && percentile <= 100.0))
    throw ConfigError("config key 'report.percentile' must lie in [50, 100]");

  // Prediction performance per algorithm and feature set.
  const auto cv_path = run.input("cv_report.csv", Stage::predict);
  const auto cv = read_csv(cv_path);
  const auto c_alg = column(cv, "algorithm", cv_path), c_set = column(cv, "feature_set", cv_path),
             c_auc = column(cv, "macro_auc", cv_path);
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> aucs;
  for (std::size_t r = 1; r < cv.size(); ++r) {
    const auto key = std::make_pair(cv[r][c_alg], cv[r][c_set]);
    if (!aucs.count(key)) order.push_back(key);
    aucs[key].push_back(parse_real(cv[r][c_auc], cv_path));
  }
  CsvWriter perf(run.output("report_performance.csv"));
  perf.row({"algorithm", "feature_set", "folds", "mean_macro_auc", "sd_macro_auc"});
  for (const auto& key : order) {
    const auto s = summarize(aucs[key]);
    perf.row({key.first, key.second, std::to_string(s.count), format_real(s.mean), format_real(s.sd)});
  }
  perf.close();

  // Feature importance ranking and the deciles of the selected dimension.
  const auto sh_path = run.input("shapley.csv", Stage::shapley);
  const auto sh = read_csv(sh_path);
  const auto c_feat = column(sh, "feature", sh_path), c_abs = column(sh, "mean_abs_shapley", sh_path);
  std::vector<FeatureImportance> importance;
  for (std::size_t r = 1; r < sh.size(); ++r) importance.push_back({sh[r][c_feat], parse_real(sh[r][c_abs], sh_path)});
  std::optional<std::size_t> selected;
  try {
    selected = select_dimension(importance);
  } catch (const DataError&) {
  }
  std::vector<std::size_t> ranked(importance.size());
  std::iota(ranked.begin(), ranked.end(), std::size_t{0});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a].mean_abs > importance[b].mean_abs; });
  const std::string selected_name = selected ? "dim_" + std::to_string(*selected) : "";
  CsvWriter imp(run.output("report_importance.csv"));
  imp.row({"rank", "feature", "mean_abs_shapley", "selected"});
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& f = importance[ranked[i]];
    imp.row({std::to_string(i + 1), f.feature, format_real(f.mean_abs), f.feature == selected_name ? "true" : "false"});
  }
  imp.close();
  if (selected) {
    const auto row = std::find_if(sh.begin() + 1, sh.end(), [&](const auto& r) { return r[c_feat] == selected_name; });
    CsvWriter dec(run.output("report_deciles.csv"));
    dec.row({"feature", "decile", "mean_shapley", "mean_normalized_value"});
    for (int k = 1; k <= 10; ++k)
      dec.row({selected_name, std::to_string(k), (*row)[column(sh, "shapley_d" + std::to_string(k), sh_path)],
               (*row)[column(sh, "value_d" + std::to_string(k), sh_path)]});
    dec.close();
  }

  // Relation-type and attribute summaries, most positive first.
  const auto rel_path = run.input("relation_utility.csv", Stage::utility);
  const auto rel = read_csv(rel_path);
  const auto c_mean = column(rel, "mean", rel_path);
  std::vector<std::size_t> rel_rows;
  for (std::size_t r = 1; r < rel.size(); ++r) rel_rows.push_back(r);
  std::stable_sort(rel_rows.begin(), rel_rows.end(), [&](std::size_t a, std::size_t b) {
    return parse_real(rel[a][c_mean], rel_path) > parse_real(rel[b][c_mean], rel_path);
  });
  CsvWriter rr(run.output("report_relations.csv"));
  rr.row(rel[0]);
  for (auto r : rel_rows) rr.row(rel[r]);
  rr.close();

  const auto attr_path = run.input("attribute_strength.csv", Stage::utility);
  const auto attr = read_csv(attr_path);
  CsvWriter ar(run.output("report_attributes.csv"));
  for (const auto& r : attr) ar.row(r);
  ar.close();

  // Group pairs beyond the percentile thresholds.
  const auto gu_path = run.input("group_utility.csv", Stage::utility);
  const auto gu = read_csv(gu_path);
  const auto c_m = column(gu, "group_m", gu_path), c_n = column(gu, "group_n", gu_path),
             c_g = column(gu, "gamma", gu_path), c_e = column(gu, "edges", gu_path);
  std::vector<GroupPairUtility> pairs;
  for (std::size_t r = 1; r < gu.size(); ++r) {
    GroupPairUtility p;
    p.m = static_cast<std::uint32_t>(r);
    p.n = static_cast<std::uint32_t>(r);
    p.gamma = parse_real(gu[r][c_g], gu_path);
    p.edges = static_cast<std::size_t>(parse_real(gu[r][c_e], gu_path));
    pairs.push_back(p);
  }
  CsvWriter gp(run.output("report_group_pairs.csv"));
  gp.row({"group_m", "group_n", "gamma", "edges", "side"});
  std::size_t kept = 0;
  if (!pairs.empty()) {
    std::vector<double> gammas;
    for (const auto& p : pairs) gammas.push_back(p.gamma);
    const double hi = nearest_rank_percentile(gammas, percentile);
    for (const auto& p : extreme_group_pairs(pairs, percentile)) {
      const auto& r = gu[p.m];
      gp.row({r[c_m], r[c_n], r[c_g], r[c_e], p.gamma > hi ? "high" : "low"});
      ++kept;
    }
  }
  gp.close();

  run.summary()["percentile"] = percentile;
  run.summary()["group_pairs_kept"] = kept;
  if (selected) run.summary()["selected_dimension"] = *selected;
}

}  // namespace

std::string_view stage_name(Stage s) {
  for (const auto& [stage, name] : kStageNames)
    if (stage == s) return name;
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (const auto& [stage, n] : kStageNames)
    if (n == name) return stage;
  throw ConfigError("unknown subcommand '" + std::string(name) + "'");
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = [] {
    std::vector<Stage> s;
    for (const auto& entry : kStageNames) s.push_back(entry.first);
    return s;
  }();
  return stages;
}

std::uint64_t stage_seed(std::uint64_t seed, Stage s) { return derive_seed(seed, fnv1a(stage_name(s))); }

StageResult run_stage(Stage stage, const Json& config) {
  StageRun run(stage, config);
  switch (stage) {
    case Stage::synth: run_synth(run); break;
    case Stage::collapse: run_collapse(run); break;
    case Stage::embed_deepwalk: run_deepwalk(run); break;
    case Stage::embed_line: run_line(run); break;
    case Stage::dine: run_dine(run); break;
    case Stage::utility: run_utility(run); break;
    case Stage::predict: run_predict(run); break;
    case Stage::shapley: run_shapley(run); break;
    case Stage::report: run_report(run); break;
  }
  return run.finish();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  return 1;
}

}  // namespace popnet
