// Command-line front end: simulate, train, embed, cluster, evaluate, ablate, sweep.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "grover/data_io.hpp"
#include "grover/evaluation.hpp"
#include "grover/experiments.hpp"
#include "grover/graph.hpp"
#include "grover/manifest.hpp"
#include "grover/trainer.hpp"

namespace fs = std::filesystem;
using namespace grover;

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& t : split(s, ',')) out.push_back(static_cast<int>(parse_int(t)));
  if (out.empty()) throw ArgumentError("empty integer list");
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& t : split(s, ',')) out.push_back(parse_double(t));
  if (out.empty()) throw ArgumentError("empty value list");
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

void write_text(const fs::path& path, const std::string& tag, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "# " << tag << "\n" << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string dataset_fingerprint(const SpotDataset& ds) { return hex64(fnv1a64(serialize(ds))); }

// Training options shared by train, ablate and sweep.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key = value file of training settings")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "training setting override key=value (repeatable)");
    cmd->add_option("--seed", seed, "training seed");
    cmd->add_option("--epochs", epochs, "training epochs");
  }

  TrainConfig resolve() const {
    TrainConfig c;
    if (!config_file.empty()) c.apply(read_key_value_file(config_file));
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) c.seed = *seed;
    if (epochs) c.epochs = *epochs;
    c.validate();
    return c;
  }
};

void add_config(Manifest& m, const TrainConfig& c) {
  for (const auto& [k, v] : c.to_pairs()) m.add("config." + k, v);
}

// Reads <dir>/corruption.csv (spot_id,modality) when present.
std::optional<CorruptionMask> read_corruption(const fs::path& dir, const SpotDataset& ds) {
  const fs::path path = dir / "corruption.csv";
  if (!fs::exists(path)) return std::nullopt;
  std::ifstream in(path);
  std::map<std::string, Eigen::Index> index;
  for (Eigen::Index i = 0; i < ds.size(); ++i) index[ds.spot_ids[static_cast<std::size_t>(i)]] = i;
  CorruptionMask mask;
  mask.corrupted.assign(static_cast<std::size_t>(ds.size()), false);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    auto parts = split(line, ',');
    if (parts.size() != 2) throw ValidationError(path.string() + ": expected spot_id,modality");
    auto it = index.find(parts[0]);
    if (it == index.end()) throw AlignmentError(path.string() + ": unknown spot '" + parts[0] + "'");
    if (!mask.modality.empty() && mask.modality != parts[1])
      throw ValidationError(path.string() + ": only one corrupted modality is supported");
    mask.modality = parts[1];
    mask.corrupted[static_cast<std::size_t>(it->second)] = true;
  }
  if (mask.modality.empty()) return std::nullopt;
  return mask;
}

int n_label_classes(const SpotDataset& ds) {
  if (!ds.labels) throw ArgumentError("dataset has no labels; pass --clusters");
  std::set<int> s(ds.labels->begin(), ds.labels->end());
  return static_cast<int>(s.size());
}

// ---- simulate ------------------------------------------------------------

struct SimulateCmd {
  std::string out;
  Eigen::Index spots = 600;
  int domains = 4;
  Eigen::Index grid_side = 25;
  std::string dims = "rna=20,adt=20,img=20";
  double noise = 1.0;
  std::vector<std::string> corrupt;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--out", out, "output dataset directory")->required();
    cmd->add_option("--spots", spots, "number of spots");
    cmd->add_option("--domains", domains, "number of spatial domains");
    cmd->add_option("--grid-side", grid_side, "lattice side length");
    cmd->add_option("--dims", dims, "modality widths name=D,...");
    cmd->add_option("--noise", noise, "Gaussian noise sigma");
    cmd->add_option("--corrupt", corrupt, "corrupted modality name:fraction:sigma (repeatable)");
    cmd->add_option("--seed", seed, "generator seed");
  }

  void run() const {
    SyntheticSpec spec;
    spec.n_spots = spots;
    spec.n_domains = domains;
    spec.grid_side = grid_side;
    spec.noise_sigma = noise;
    spec.dims.clear();
    for (const auto& d : split(dims, ',')) {
      auto eq = d.find('=');
      if (eq == std::string::npos) throw ArgumentError("--dims expects name=D, got '" + d + "'");
      spec.dims.emplace_back(d.substr(0, eq), static_cast<Eigen::Index>(parse_int(d.substr(eq + 1))));
    }
    for (const auto& c : corrupt) {
      auto parts = split(c, ':');
      if (parts.size() != 3) throw ArgumentError("--corrupt expects name:fraction:sigma, got '" + c + "'");
      spec.corruption.push_back({parts[0], parse_double(parts[1]), parse_double(parts[2])});
    }
    spec.validate();
    const SyntheticDataset syn = generate_synthetic(spec, seed);

    Manifest m;
    m.add("command", "simulate");
    m.add("spots", std::to_string(spots));
    m.add("domains", std::to_string(domains));
    m.add("grid_side", std::to_string(grid_side));
    m.add("dims", dims);
    m.add("noise", format_double(noise));
    m.add("corrupt", join(corrupt));
    m.add("seed", std::to_string(seed));
    const fs::path dir(out);
    save_dataset(syn.dataset, dir, m.tag());
    std::ostringstream c;
    c << "spot_id,modality\n";
    for (const auto& [name, rows] : syn.corrupted_spots)
      for (Eigen::Index i : rows) c << syn.dataset.spot_ids[static_cast<std::size_t>(i)] << ',' << name << "\n";
    write_text(dir / "corruption.csv", m.tag(), c.str());
    m.write(dir / "manifest.txt", utc_timestamp());
    std::cout << "wrote " << syn.dataset.size() << " spots to " << dir.string() << "\n";
  }
};

// ---- train ---------------------------------------------------------------

struct TrainCmd {
  std::string data, out;
  ConfigFlags config;
  bool dump_edges = false;
  bool quiet = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--out", out, "output run directory")->required();
    config.attach(cmd);
    cmd->add_flag("--dump-edges", dump_edges, "write graph edge lists");
    cmd->add_flag("--quiet", quiet, "no per-epoch progress");
  }

  void run() const {
    const SpotDataset ds = load_dataset_dir(data);
    const TrainConfig c = config.resolve();
    Manifest m;
    m.add("command", "train");
    m.note("data", data);
    m.add("data.fingerprint", dataset_fingerprint(ds));
    add_config(m, c);
    const fs::path dir(out);
    fs::create_directories(dir);

    const int every = std::max(1, c.epochs / 10);
    TrainResult r = train(ds, c, [&](const EpochRecord& e) {
      if (!quiet && (e.epoch % every == 0 || e.epoch == c.epochs))
        std::cerr << "epoch " << e.epoch << " loss " << format_double(e.total) << "\n";
    });
    auto meta = checkpoint_meta(r.model);
    meta["manifest_hash"] = m.hash();
    save_checkpoint(dir / "model.ckpt", r.params, meta);
    r.log.write_csv(dir / "loss.csv", m.tag());
    if (dump_edges) {
      write_edge_list(dir / "edges_spatial.csv", r.graphs.spatial, m.tag());
      for (std::size_t k = 0; k < ds.num_modalities(); ++k)
        write_edge_list(dir / ("edges_feature_" + ds.modalities[k].name + ".csv"), r.graphs.feature[k], m.tag());
    }
    m.write(dir / "manifest.txt", utc_timestamp());
    std::cout << "trained " << c.epochs << " epochs, final loss "
              << (r.log.epochs.empty() ? std::string("n/a") : format_double(r.log.epochs.back().total)) << "\n";
  }
};

// ---- embed ---------------------------------------------------------------

struct EmbedCmd {
  std::string data, model, out;
  bool dump_embeddings = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--model", model, "checkpoint from train")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "output directory")->required();
    cmd->add_flag("--dump-embeddings", dump_embeddings, "also write per-modality embeddings");
  }

  void run() const {
    const SpotDataset ds = load_dataset_dir(data);
    LoadedModel lm = load_model(model);
    lm.model.check_compatible(ds);
    Manifest m;
    m.add("command", "embed");
    m.note("data", data);
    m.add("data.fingerprint", dataset_fingerprint(ds));
    m.note("model", model);
    m.add("model.fingerprint", file_fingerprint(model));
    const GraphSet graphs = build_graphs(ds, lm.model.config());
    const EmbedResult e = embed(lm.model, lm.params, ds, graphs);
    const fs::path dir(out);
    auto dims = [](Eigen::Index d) {
      std::vector<std::string> c;
      for (Eigen::Index j = 0; j < d; ++j) c.push_back("dim_" + std::to_string(j));
      return c;
    };
    write_dense_csv(dir / "embedding.csv", "spot_id", dims(e.z.cols()), ds.spot_ids, e.z, m.tag());
    if (e.decision.size() > 0) {
      std::ostringstream g;
      g << "spot_id";
      for (const auto& name : lm.model.modality_names()) g << ",w_" << name;
      g << ",fallback\n";
      for (Eigen::Index i = 0; i < e.decision.size(); ++i) {
        g << ds.spot_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index k = 0; k < e.decision.weights.cols(); ++k) g << ',' << format_double(e.decision.weights(i, k));
        g << ',' << (e.decision.fallback[static_cast<std::size_t>(i)] ? 1 : 0) << "\n";
      }
      write_text(dir / "gate_weights.csv", m.tag(), g.str());
    }
    if (dump_embeddings)
      for (std::size_t k = 0; k < e.embeddings.size(); ++k)
        write_dense_csv(dir / ("embedding_" + lm.model.modality_names()[k] + ".csv"), "spot_id",
                        dims(e.embeddings[k].fused.cols()), ds.spot_ids, e.embeddings[k].fused, m.tag());
    m.write(dir / "manifest.txt", utc_timestamp());
    std::cout << "embedded " << ds.size() << " spots into " << e.z.cols() << " dimensions\n";
  }
};

// ---- cluster / evaluate --------------------------------------------------

struct EvalCmd {
  bool with_truth;
  std::string embedding, labels, out;
  std::string counts = "6,7,8,9,10";
  std::uint64_t seed = 0;

  explicit EvalCmd(bool truth) : with_truth(truth) {}

  void attach(CLI::App* cmd) {
    cmd->add_option("--embedding", embedding, "embedding.csv from embed")->required()->check(CLI::ExistingFile);
    if (with_truth) cmd->add_option("--labels", labels, "ground-truth labels.csv")->required()->check(CLI::ExistingFile);
    cmd->add_option("--clusters", counts, "comma-separated cluster counts");
    cmd->add_option("--seed", seed, "k-means seed");
    cmd->add_option("--out", out, "output directory")->required();
  }

  void run() const {
    const DenseTable z = read_dense_csv(embedding);
    std::optional<std::vector<int>> truth;
    Manifest m;
    m.add("command", with_truth ? "evaluate" : "cluster");
    m.note("embedding", embedding);
    m.add("embedding.fingerprint", file_fingerprint(embedding));
    if (with_truth) {
      std::vector<std::string> ids;
      auto raw = read_labels_csv(labels, &ids);
      std::map<std::string, int> by_id;
      for (std::size_t i = 0; i < ids.size(); ++i) by_id[ids[i]] = raw[i];
      std::vector<int> aligned;
      for (const auto& id : z.row_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw AlignmentError(labels + ": no label for spot '" + id + "'");
        aligned.push_back(it->second);
      }
      truth = aligned;
      m.note("labels", labels);
      m.add("labels.fingerprint", file_fingerprint(labels));
    }
    m.add("clusters", counts);
    m.add("seed", std::to_string(seed));
    const EvalReport report = evaluate(z.values, truth, parse_int_list(counts), seed);
    const fs::path dir(out);
    write_text(dir / "report.csv", m.tag(), report.to_csv());
    write_text(dir / "report.txt", m.tag(), report.to_text());
    std::ostringstream a;
    a << "spot_id";
    for (const auto& row : report.rows) a << ",k" << row.clusters;
    a << "\n";
    for (std::size_t i = 0; i < z.row_ids.size(); ++i) {
      a << z.row_ids[i];
      for (const auto& row : report.rows) a << ',' << row.assignments[i];
      a << "\n";
    }
    write_text(dir / "assignments.csv", m.tag(), a.str());
    m.write(dir / "manifest.txt", utc_timestamp());
    std::cout << report.to_text();
  }
};

// ---- ablate / sweep ------------------------------------------------------

struct AblateCmd {
  std::string data, out;
  std::string seeds = "1,2,3,4,5";
  std::string modes = "full,no_moe,no_contrast,no_kan";
  std::optional<int> clusters;
  ConfigFlags config;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "dataset directory with labels")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--out", out, "output directory")->required();
    cmd->add_option("--seeds", seeds, "comma-separated training seeds");
    cmd->add_option("--modes", modes, "comma-separated subset of full,no_moe,no_contrast,no_kan");
    cmd->add_option("--clusters", clusters, "k-means cluster count (default: number of label classes)");
    config.attach(cmd);
  }

  void run() const {
    const SpotDataset ds = load_dataset_dir(data);
    const TrainConfig c = config.resolve();
    std::vector<std::uint64_t> seed_list;
    for (int s : parse_int_list(seeds)) seed_list.push_back(static_cast<std::uint64_t>(s));
    std::vector<AblationMode> mode_list;
    for (const auto& name : split(modes, ',')) mode_list.push_back(parse_mode(name));
    const int k = clusters ? *clusters : n_label_classes(ds);
    const auto mask = read_corruption(data, ds);

    Manifest m;
    m.add("command", "ablate");
    m.note("data", data);
    m.add("data.fingerprint", dataset_fingerprint(ds));
    m.add("seeds", seeds);
    m.add("modes", modes);
    m.add("clusters", std::to_string(k));
    add_config(m, c);
    const AblationReport report = run_ablation(ds, c, mode_list, seed_list, k, mask);
    const fs::path dir(out);
    write_text(dir / "ablation.csv", m.tag(), report.to_csv());
    write_text(dir / "ablation.txt", m.tag(), report.to_text());
    if (mask) {
      std::ostringstream g;
      g << "mode,seed,corrupted_weight";
      for (const auto& name : ds.modality_names()) g << ",clean_w_" << name;
      g << ",fallback\n";
      for (const auto& row : report.rows)
        for (const auto& run : row.runs)
          if (run.gate) {
            g << mode_name(row.mode) << ',' << run.config.seed << ',' << format_double(run.gate->corrupted_mean);
            for (double w : run.gate->clean_mean) g << ',' << format_double(w);
            g << ',' << run.gate->fallback_count << "\n";
          }
      write_text(dir / "gate_summary.csv", m.tag(), g.str());
    }
    m.write(dir / "manifest.txt", utc_timestamp());
    std::cout << report.to_text();
  }
};

struct SweepCmd {
  std::string data, out, param = "gamma";
  std::string values = "0.1,0.2,0.3,0.4,0.5";
  std::optional<int> clusters;
  ConfigFlags config;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "dataset directory with labels")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--out", out, "output directory")->required();
    cmd->add_option("--param", param, "gamma or lambda");
    cmd->add_option("--values", values, "comma-separated values");
    cmd->add_option("--clusters", clusters, "k-means cluster count (default: number of label classes)");
    config.attach(cmd);
  }

  void run() const {
    const SpotDataset ds = load_dataset_dir(data);
    const TrainConfig c = config.resolve();
    const int k = clusters ? *clusters : n_label_classes(ds);
    Manifest m;
    m.add("command", "sweep");
    m.note("data", data);
    m.add("data.fingerprint", dataset_fingerprint(ds));
    m.add("param", param);
    m.add("values", values);
    m.add("clusters", std::to_string(k));
    add_config(m, c);
    const SweepReport report = run_sweep(ds, c, param, parse_double_list(values), k);
    const fs::path dir(out);
    write_text(dir / "sweep.csv", m.tag(), report.to_csv());
    write_text(dir / "sweep.txt", m.tag(), report.to_text());
    m.write(dir / "manifest.txt", utc_timestamp());
    std::cout << report.to_text();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial multi-omics integration with dual-graph KAN encoders and gated experts"};
  app.name("grover");
  app.require_subcommand(1);

  SimulateCmd simulate;
  TrainCmd train_cmd;
  EmbedCmd embed_cmd;
  EvalCmd cluster_cmd(false), evaluate_cmd(true);
  AblateCmd ablate;
  SweepCmd sweep;
  std::function<void()> action;

  auto* s = app.add_subcommand("simulate", "write a synthetic labelled dataset");
  simulate.attach(s);
  s->callback([&] { action = [&] { simulate.run(); }; });
  auto* t = app.add_subcommand("train", "train a model and write checkpoint and loss log");
  train_cmd.attach(t);
  t->callback([&] { action = [&] { train_cmd.run(); }; });
  auto* e = app.add_subcommand("embed", "write fused embeddings and gate weights");
  embed_cmd.attach(e);
  e->callback([&] { action = [&] { embed_cmd.run(); }; });
  auto* c = app.add_subcommand("cluster", "k-means over cluster counts with internal metrics");
  cluster_cmd.attach(c);
  c->callback([&] { action = [&] { cluster_cmd.run(); }; });
  auto* v = app.add_subcommand("evaluate", "k-means over cluster counts scored against labels");
  evaluate_cmd.attach(v);
  v->callback([&] { action = [&] { evaluate_cmd.run(); }; });
  auto* a = app.add_subcommand("ablate", "compare the full model with its ablations over seeds");
  ablate.attach(a);
  a->callback([&] { action = [&] { ablate.run(); }; });
  auto* w = app.add_subcommand("sweep", "vary gamma or lambda and report clustering scores");
  sweep.attach(w);
  w->callback([&] { action = [&] { sweep.run(); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& err) {
    std::cerr << "grover: " << err.what() << "\n";
    return 2;
  }
  try {
    action();
  } catch (const std::exception& err) {
    std::cerr << "grover: error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
