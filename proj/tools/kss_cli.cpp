// kss: command-line front end for graph building, gradient checks, toy
// training and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kss/kss.hpp"

namespace {

using kss::text::format_shortest;

void print_summary(std::ostream& out, const kss::AdjacencySummary& s, const std::string& prefix) {
  out << prefix << "n=" << s.n << '\n'
      << prefix << "nnz=" << s.nnz << '\n'
      << prefix << "edges=" << s.edges << '\n'
      << prefix << "off_diagonal_edges=" << s.off_diagonal_edges << '\n'
      << prefix << "symmetric=" << (s.symmetric ? "true" : "false") << '\n'
      << prefix << "min_degree=" << format_shortest(s.min_degree) << '\n'
      << prefix << "max_degree=" << format_shortest(s.max_degree) << '\n'
      << prefix << "mean_degree=" << format_shortest(s.mean_degree) << '\n';
}

nlohmann::json summary_json(const kss::AdjacencySummary& s) {
  return {{"n", s.n},
          {"nnz", s.nnz},
          {"edges", s.edges},
          {"off_diagonal_edges", s.off_diagonal_edges},
          {"symmetric", s.symmetric},
          {"min_degree", s.min_degree},
          {"max_degree", s.max_degree},
          {"mean_degree", s.mean_degree}};
}

void write_adjacency(const kss::AdjacencyMatrix& a, const std::string& path, bool binary) {
  if (binary)
    kss::save_adjacency_binary(a, path);
  else
    kss::save_matrix_text(a, path);
}

// ---------------------------------------------------------------------------

struct BuildGraphArgs {
  std::string annotations, knowledge, vocab, out, out_normalized, summary_json;
  double lambda = 0.4, tau = 0.02, eta = 0.4, threshold = 0.4;
  std::string normalization = "after_identity_mix";
  bool binary = false;
};

int run_build_graph(const BuildGraphArgs& a) {
  const auto vocab = kss::load_vocabulary(a.vocab);
  const auto ann = kss::load_annotations(a.annotations, vocab);
  kss::KnowledgeEdgeList edges;
  if (!a.knowledge.empty()) edges = kss::load_knowledge_edges(a.knowledge, vocab);

  kss::GraphPipelineConfig cfg;
  cfg.lambda = a.lambda;
  cfg.tau = a.tau;
  cfg.eta = a.eta;
  cfg.binarize_threshold = a.threshold;
  cfg.placement = a.normalization == "after_superimpose"
                      ? kss::NormalizationPlacement::kAfterSuperimpose
                      : kss::NormalizationPlacement::kAfterIdentityMix;
  const auto g = kss::build_ks_graph(ann, edges, vocab.size(), cfg);

  const std::string out_norm = a.out_normalized.empty() ? a.out + ".normalized" : a.out_normalized;
  write_adjacency(g.ks, a.out, a.binary);
  write_adjacency(g.ks_normalized, out_norm, a.binary);

  const auto s = kss::summarize(g.ks);
  const auto sn = kss::summarize(g.ks_normalized);
  std::cout << "labels=" << vocab.size() << '\n'
            << "samples=" << ann.size() << '\n'
            << "empty_samples=" << ann.empty_count() << '\n'
            << "knowledge_triples=" << edges.triples.size() << '\n'
            << "knowledge_dropped=" << edges.dropped << '\n'
            << "lambda=" << format_shortest(cfg.lambda) << '\n'
            << "tau=" << format_shortest(cfg.tau) << '\n'
            << "eta=" << format_shortest(cfg.eta) << '\n'
            << "binarize_threshold=" << format_shortest(cfg.binarize_threshold) << '\n'
            << "normalization=" << a.normalization << '\n';
  print_summary(std::cout, s, "");
  print_summary(std::cout, sn, "normalized.");
  std::cout << "out=" << a.out << '\n' << "out_normalized=" << out_norm << '\n';

  if (!a.summary_json.empty()) {
    nlohmann::json j = {{"labels", vocab.size()},
                        {"samples", ann.size()},
                        {"empty_samples", ann.empty_count()},
                        {"knowledge_triples", edges.triples.size()},
                        {"knowledge_dropped", edges.dropped},
                        {"lambda", cfg.lambda},
                        {"tau", cfg.tau},
                        {"eta", cfg.eta},
                        {"binarize_threshold", cfg.binarize_threshold},
                        {"normalization", a.normalization},
                        {"ks", summary_json(s)},
                        {"ks_normalized", summary_json(sn)}};
    auto out = kss::text::open_out(a.summary_json);
    out << j.dump(2) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

int run_inspect(const std::string& path, bool print) {
  const auto a = kss::load_adjacency(path);
  std::cout << "format=" << (kss::has_adjacency_magic(path) ? "binary" : "text") << '\n';
  print_summary(std::cout, kss::summarize(a), "");
  if (print) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j)
        std::cout << (j ? " " : "") << kss::text::format_double(a(i, j));
      std::cout << '\n';
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 1;
  std::string config;
  std::size_t trials = 0;
  bool corrupt = false;
};

int run_gradcheck(const GradcheckArgs& a) {
  kss::GradcheckConfig cfg;
  if (!a.config.empty()) {
    const auto kv = kss::KeyValueConfig::load(a.config);
    kv.check_keys({"trials", "step", "tolerance", "model_tolerance"});
    if (auto v = kv.get_int("trials")) cfg.trials = *v;
    if (auto v = kv.get_double("step")) cfg.step = *v;
    if (auto v = kv.get_double("tolerance")) cfg.tolerance = *v;
    if (auto v = kv.get_double("model_tolerance")) cfg.model_tolerance = *v;
  }
  if (a.trials > 0) cfg.trials = a.trials;
  cfg.corrupt_backward = a.corrupt;
  kss::detail::require(cfg.trials >= 1, "gradcheck: trials must be >= 1");
  kss::detail::require(cfg.step > 0.0, "gradcheck: step must be > 0");

  const auto r = kss::run_gradchecks(a.seed, cfg);
  auto line = [&](const char* name, double err, double tol) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-10s max_rel_error=%.6e tolerance=%.0e %s", name, err, tol,
                  err <= tol ? "ok" : "FAIL");
    std::cout << buf << '\n';
  };
  line("gcn_layer", r.gcn_layer, cfg.tolerance);
  line("lc_2d", r.lc_2d, cfg.tolerance);
  line("lc_3d", r.lc_3d, cfg.tolerance);
  line("full_model", r.full_model, cfg.model_tolerance);
  const bool ok = r.passed(cfg);
  std::cout << "status=" << (ok ? "pass" : "fail") << '\n';
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct ToyArgs {
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t channel_divisor = 0;
  std::size_t epochs = 0;
  bool epochs_given = false;
};

kss::ToyExperimentConfig resolve_toy_config(const ToyArgs& a) {
  kss::KeyValueConfig kv;
  if (!a.config.empty()) kv = kss::KeyValueConfig::load(a.config);
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw kss::ValidationError("--set expects key=value, got '" + s + "'");
    kv.set(std::string(kss::text::trim(s.substr(0, eq))), std::string(kss::text::trim(s.substr(eq + 1))));
  }
  if (a.seed_given) {
    kv.set("seed", std::to_string(a.seed));
    kv.erase("data_seed");
  }
  if (a.channel_divisor > 0) kv.set("channel_divisor", std::to_string(a.channel_divisor));
  if (a.epochs_given) kv.set("epochs", std::to_string(a.epochs));
  return kss::ToyExperimentConfig::from_kv(kv);
}

void add_toy_options(CLI::App* cmd, ToyArgs& a) {
  cmd->add_option("--config", a.config, "Training config file (key = value lines)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", a.sets, "Override one config key, e.g. --set lr_gcn=0.001 (repeatable)");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&a](std::uint64_t s) { a.seed = s, a.seed_given = true; },
      "Seed for data, initialization, shuffling and dropout");
  cmd->add_option("--channel-divisor", a.channel_divisor,
                  "Divide the 256/512/1024/2048 channel schedule by this value")
      ->check(CLI::PositiveNumber);
}

struct TrainArgs {
  ToyArgs toy;
  std::string out, history, dump_config;
};

int run_train(const TrainArgs& a) {
  const auto cfg = resolve_toy_config(a.toy);
  if (!a.dump_config.empty()) {
    const auto text = cfg.to_kv().to_string();
    if (a.dump_config == "-") {
      std::cout << text;
    } else {
      auto out = kss::text::open_out(a.dump_config);
      out << text;
    }
    return 0;
  }

  std::ofstream history;
  if (!a.history.empty()) {
    const bool fresh = !std::filesystem::exists(a.history) || std::filesystem::file_size(a.history) == 0;
    history.open(a.history, std::ios::app);
    if (!history) throw kss::Error("cannot write '" + a.history + "'");
    if (fresh) history << "epoch,loss,mAP\n";
  }
  const auto result = kss::run_toy_experiment(cfg, nullptr, [&](const kss::EpochRecord& r) {
    std::cout << "epoch=" << r.epoch << " loss=" << format_shortest(r.loss);
    if (r.train_map) std::cout << " train_mAP=" << format_shortest(*r.train_map);
    if (r.val_map) std::cout << " val_mAP=" << format_shortest(*r.val_map);
    std::cout << std::endl;
    if (history.is_open()) {
      history << r.epoch << ',' << format_shortest(r.loss) << ','
              << (r.train_map ? format_shortest(*r.train_map) : "") << '\n';
      history.flush();
    }
  });
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    std::cout << "final_train_mAP=" << format_shortest(last.train_map.value_or(0.0)) << '\n';
    if (last.val_map) std::cout << "final_val_mAP=" << format_shortest(*last.val_map) << '\n';
  }
  if (!a.out.empty()) {
    kss::save_model(result.model, a.out);
    std::cout << "checkpoint=" << a.out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string scores, targets, checkpoint;
  ToyArgs toy;
  std::string split = "train";
  std::string decision = "threshold";
  std::size_t k = 3;
  double threshold = 0.5;
};

kss::Matrix<int> to_binary(const kss::Matrix<double>& m) {
  kss::Matrix<int> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double v = m.values()[i];
    kss::detail::require(v == 0.0 || v == 1.0, "targets must be 0 or 1");
    out.values()[i] = static_cast<int>(v);
  }
  return out;
}

int run_evaluate(const EvaluateArgs& a) {
  kss::ScoreMatrix sm;
  if (!a.checkpoint.empty()) {
    auto cfg = resolve_toy_config(a.toy);
    auto ex = kss::prepare_toy_experiment(cfg);
    kss::load_model(ex.model, a.checkpoint);
    const auto& data = a.split == "validation" ? ex.validation : ex.dataset.data;
    sm.scores = kss::predict_scores(ex.model, data, ex.e0, cfg.train.use_lc);
    sm.targets = data.targets;
  } else {
    kss::detail::require(!a.scores.empty() && !a.targets.empty(),
                         "evaluate: give --scores and --targets, or --checkpoint");
    sm.scores = kss::load_matrix_text(a.scores);
    sm.targets = to_binary(kss::load_matrix_text(a.targets));
  }
  sm.validate();
  kss::DecisionRule rule;
  if (a.decision == "topk") {
    rule = kss::DecisionRule::top_k(a.k);
  } else {
    rule.threshold = a.threshold;
  }
  const auto m = kss::map_score(sm);
  const auto p = kss::prf_suite(sm, rule);
  const double row[] = {m.map, p.cp, p.cr, p.cf1, p.op, p.orc, p.of1};
  std::printf("%6s %6s %6s %6s %6s %6s %6s\n", "mAP", "CP", "CR", "CF1", "OP", "OR", "OF1");
  for (std::size_t i = 0; i < 7; ++i) std::printf("%s%6.1f", i ? " " : "", 100.0 * row[i]);
  std::printf("\n");
  if (m.excluded > 0)
    std::cerr << "note: " << m.excluded << " class(es) without positives excluded\n";
  return 0;
}

// ---------------------------------------------------------------------------

int run_embed(const std::string& vocab_path, const std::string& table_path, const std::string& out) {
  const auto vocab = kss::load_vocabulary(vocab_path);
  const auto table = kss::load_embedding_table(table_path);
  const auto e = kss::build_initial_embeddings(table, vocab);
  kss::save_matrix_text(e, out);
  std::cout << "labels=" << e.rows() << '\n' << "dim=" << e.cols() << '\n' << "out=" << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-graph multi-label classification toolkit"};
  app.name("kss");
  app.require_subcommand(1, 1);
  std::function<int()> action;

  BuildGraphArgs bg;
  auto* build = app.add_subcommand("build-graph", "Build the KS label graph from annotations and knowledge edges");
  build->add_option("--annotations", bg.annotations, "Annotation file: sample_id label...")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--knowledge", bg.knowledge, "Knowledge edges: head<TAB>relation<TAB>tail<TAB>weight")
      ->check(CLI::ExistingFile);
  build->add_option("--vocab", bg.vocab, "Vocabulary: one label per line")->required()->check(CLI::ExistingFile);
  build->add_option("--lambda", bg.lambda, "Weight of the statistical graph")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  build->add_option("--tau", bg.tau, "Edge filter threshold")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  build->add_option("--eta", bg.eta, "Weight of the filtered graph against the identity")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  build->add_option("--threshold", bg.threshold, "Conditional-probability binarization threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  build->add_option("--normalization", bg.normalization, "Where the final normalization happens")
      ->check(CLI::IsMember({"after_identity_mix", "after_superimpose"}))
      ->capture_default_str();
  build->add_option("--out", bg.out, "Output path for A_KS")->required();
  build->add_option("--out-normalized", bg.out_normalized, "Output path for the normalized A_KS (default: <out>.normalized)");
  build->add_flag("--binary", bg.binary, "Write the binary adjacency format instead of text");
  build->add_option("--summary-json", bg.summary_json, "Also write the summary as JSON");
  build->callback([&] { action = [&] { return run_build_graph(bg); }; });

  std::string inspect_path;
  bool inspect_print = false;
  auto* inspect = app.add_subcommand("inspect", "Summarize an adjacency file (text or binary)");
  inspect->add_option("matrix", inspect_path, "Adjacency file")->required()->check(CLI::ExistingFile);
  inspect->add_flag("--print", inspect_print, "Also print the matrix");
  inspect->callback([&] { action = [&] { return run_inspect(inspect_path, inspect_print); }; });

  GradcheckArgs gc;
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  grad->add_option("--seed", gc.seed, "Seed for the random instances")->capture_default_str();
  grad->add_option("--config", gc.config, "Config file with trials, step, tolerance, model_tolerance")
      ->check(CLI::ExistingFile);
  grad->add_option("--trials", gc.trials, "Trials per component (default 20)");
  grad->add_flag("--corrupt-backward", gc.corrupt)->group("");
  grad->callback([&] { action = [&] { return run_gradcheck(gc); }; });

  TrainArgs tr;
  auto* train = app.add_subcommand("train-toy", "Train the toy model on the synthetic dataset");
  add_toy_options(train, tr.toy);
  train->add_option_function<std::size_t>(
      "--epochs", [&tr](std::size_t e) { tr.toy.epochs = e, tr.toy.epochs_given = true; },
      "Override the epoch count");
  train->add_option("--out", tr.out, "Write the trained parameters to this checkpoint");
  train->add_option("--history", tr.history, "Append epoch,loss,mAP rows to this CSV file");
  train->add_option("--dump-config", tr.dump_config,
                    "Write the fully resolved config here ('-' for stdout) and exit");
  train->callback([&] { action = [&] { return run_train(tr); }; });

  EvaluateArgs ev;
  auto* eval = app.add_subcommand("evaluate", "Print mAP, CP, CR, CF1, OP, OR, OF1 in percent");
  eval->add_option("--scores", ev.scores, "Score matrix file (samples x labels)");
  eval->add_option("--targets", ev.targets, "Target matrix file of 0/1 values");
  eval->add_option("--checkpoint", ev.checkpoint, "Evaluate a train-toy checkpoint instead");
  add_toy_options(eval, ev.toy);
  eval->add_option("--split", ev.split, "Synthetic split to score with --checkpoint")
      ->check(CLI::IsMember({"train", "validation"}))
      ->capture_default_str();
  eval->add_option("--decision", ev.decision, "Decision rule for P/R/F1")
      ->check(CLI::IsMember({"threshold", "topk"}))
      ->capture_default_str();
  eval->add_option("--k", ev.k, "k for the top-k rule")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--threshold", ev.threshold, "Sigmoid-score threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  eval->callback([&] { action = [&] { return run_evaluate(ev); }; });

  std::string ev_vocab, ev_table, ev_out;
  auto* embed = app.add_subcommand("embed", "Build initial label embeddings from a word-embedding table");
  embed->add_option("--vocab", ev_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  embed->add_option("--table", ev_table, "Embedding table: token v1 ... vF")->required()->check(CLI::ExistingFile);
  embed->add_option("--out", ev_out, "Output matrix file")->required();
  embed->callback([&] { action = [&] { return run_embed(ev_vocab, ev_table, ev_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    return action();
  } catch (const kss::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const kss::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const kss::ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
}
