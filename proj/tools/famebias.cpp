// famebias: command-line front end for the embedding-bias toolkit.

#include <pthread.h>
#include <csignal>
#include <thread>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "famebias/agreement.hpp"
#include "famebias/config.hpp"
#include "famebias/metrics.hpp"
#include "famebias/proxy.hpp"
#include "famebias/queries.hpp"
#include "famebias/sim.hpp"
#include "famebias/sweep.hpp"

using namespace famebias;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::string format;
};

ProjectConfig require_config(const Globals& g) {
  if (g.config.empty()) throw CLI::ValidationError("--config", "this command needs --config <file>");
  return load_config(g.config);
}

void emit_text(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(g.out, std::ios::binary);
  if (!out || !(out << text) || !out.flush()) throw Error(Errc::io_failure, "cannot write " + g.out);
}

std::string require_out(const Globals& g) {
  if (g.out.empty()) throw CLI::ValidationError("--out", "this command writes a binary container; pass --out <path>");
  return g.out;
}

std::string format_or(const Globals& g, const char* fallback) { return g.format.empty() ? fallback : g.format; }

std::string spans_text(const std::vector<SpanRef>& spans) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < spans.size(); ++i) {
    out << (i ? ", " : "") << '[' << spans[i].start << ", " << spans[i].end << ')';
  }
  out << ']';
  return out.str();
}

SpanRef parse_span(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--span", "expected start:end, got '" + text + "'");
  try {
    return {std::stoul(text.substr(0, colon)), std::stoul(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--span", "expected start:end, got '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding-space trigger/target bias toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "INI config with [attack.<name>], [sweep], [simulate]");
  app.add_option("--out", g.out, "Output path (stdout when omitted for text output)");
  app.add_option("--format", g.format, "markdown|csv|json, or jsonl|csv for emit-queries");

  // encode
  std::string table_path, prompt, oov = "error";
  auto* encode = app.add_subcommand("encode", "Tokenize a prompt and look up per-token vectors");
  encode->add_option("--table", table_path, "Embedding table (FBEB or text)")->required();
  encode->add_option("--prompt", prompt, "Prompt text")->required();
  encode->add_option("--oov", oov, "error|zero for tokens missing from the table");

  // attack
  std::string attack_name, sequence_path;
  std::vector<std::string> span_args;
  auto* attack = app.add_subcommand("attack", "Blend a configured target into trigger positions");
  attack->add_option("--attack", attack_name, "Attack section name from --config")->required();
  auto* seq_opt = attack->add_option("--sequence", sequence_path, "Input FBEB sequence");
  auto* prompt_opt = attack->add_option("--prompt", prompt, "Prompt to encode first (needs --table)");
  attack->add_option("--table", table_path, "Embedding table used with --prompt");
  attack->add_option("--span", span_args, "Explicit start:end span instead of trigger matching");
  seq_opt->excludes(prompt_opt);

  // report
  std::string labels_path, metric = "bsr";
  bool summary = false;
  auto* report = app.add_subcommand("report", "Per-cell and pooled BSR/TFR/AII tables from a labels file");
  report->add_option("--labels", labels_path, "Labels CSV")->required();
  report->add_option("--metric", metric, "bsr|tfr|aii");
  report->add_flag("--summary", summary, "Per-template and overall rates instead of the wide table");

  // sweep
  std::string points_path, labels_root;
  auto* sweep = app.add_subcommand("sweep", "List plan configs, or pick the best point by AII");
  auto* points_opt = sweep->add_option("--points", points_path, "Measured points CSV (alpha,beta,bsr,tfr)");
  sweep->add_option("--labels-root", labels_root, "Directory holding <sweep-id>/<alpha>_<beta>/labels.csv")
      ->excludes(points_opt);

  // agreement
  std::string judge = "llava";
  auto* agreement = app.add_subcommand("agreement", "Fleiss/Cohen kappa report from a labels file");
  agreement->add_option("--labels", labels_path, "Labels CSV")->required();
  agreement->add_option("--judge", judge, "rater_id of the automated judge");

  // simulate
  std::string trace_path;
  auto* simulate = app.add_subcommand("simulate", "Synthetic BSR/TFR tradeoff over the [sweep] plan");
  simulate->add_option("--trace", trace_path, "Per-case trace CSV");

  // serve
  std::string listen;
  bool use_stdio = false;
  auto* serve = app.add_subcommand("serve", "Run the poisoned-encoder proxy");
  auto* listen_opt = serve->add_option("--listen", listen, "host:port");
  auto* stdio_opt = serve->add_flag("--stdio", use_stdio, "Serve on stdin/stdout");
  listen_opt->excludes(stdio_opt);

  // emit-queries
  std::string cells_path;
  auto* queries = app.add_subcommand("emit-queries", "Judge questions for every generated image");
  queries->add_option("--cells", cells_path, "CSV trigger,target,image_id[,trigger_kind]")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (encode->parsed()) {
      const auto table = load_table(table_path);
      const auto seq = encode_prompt(table, tokenize(prompt), parse_oov_policy(oov));
      write_container(seq, require_out(g));
      std::cout << "encoded " << seq.size() << " tokens, dim " << seq.dim() << '\n';
    } else if (attack->parsed()) {
      const auto cfg = require_config(g);
      auto it = cfg.attacks.find(attack_name);
      if (it == cfg.attacks.end()) throw Error(Errc::unknown_attack, "no [attack." + attack_name + "] in config");
      const auto& reg = it->second;
      std::optional<EmbeddingSequence> seq;
      if (!sequence_path.empty()) {
        seq = read_sequence(sequence_path);
      } else if (!prompt.empty()) {
        if (table_path.empty()) throw CLI::ValidationError("--table", "--prompt needs --table");
        seq = encode_prompt(load_table(table_path), tokenize(prompt), reg.config.oov_policy);
      } else {
        throw CLI::ValidationError("attack", "pass --sequence or --prompt");
      }
      const std::string out_path = require_out(g);
      BiasOutcome outcome = [&] {
        if (span_args.empty()) return apply_attack(*seq, reg.config, reg.table.get());
        std::vector<SpanRef> spans;
        for (const auto& s : span_args) spans.push_back(parse_span(s));
        return apply_attack_at(*seq, reg.config, spans, reg.table.get());
      }();
      write_container(outcome.sequence, out_path);
      std::cout << outcome.config_echo << "\nmodified spans: " << spans_text(outcome.modified_spans) << '\n';
    } else if (report->parsed()) {
      const auto cells = compute_cells(consensus(ingest_labels(labels_path)));
      const auto fmt = parse_report_format(format_or(g, "markdown"));
      emit_text(g, summary ? render_summary(cells, fmt) : render_report(cells, parse_metric(metric), fmt));
    } else if (sweep->parsed()) {
      const auto fmt = parse_report_format(format_or(g, "markdown"));
      std::optional<ProjectConfig> cfg;
      if (!g.config.empty()) cfg = load_config(g.config);
      if (!labels_root.empty()) {
        if (!cfg || !cfg->sweep) throw CLI::ValidationError("sweep", "--labels-root needs a [sweep] section");
        const auto configs = enumerate_points(*cfg->sweep);
        const auto points = join_results(configs, read_point_labels(labels_root, cfg->sweep_id, configs));
        emit_text(g, render_sweep(points, select_best(points), fmt));
      } else if (points_path.empty()) {
        if (!cfg || !cfg->sweep) throw CLI::ValidationError("sweep", "needs --points or a [sweep] section in --config");
        std::ostringstream out;
        out << "id,alpha,beta\n";
        for (const auto& c : enumerate_points(*cfg->sweep)) {
          out << config_id(c.alpha, c.beta) << ',' << c.alpha << ',' << c.beta << '\n';
        }
        emit_text(g, out.str());
      } else {
        auto points = read_sweep_points(points_path);
        if (cfg && cfg->sweep) {
          std::map<std::string, Rates> results;
          for (const auto& p : points) {
            Rates r;
            r.bsr = p.bsr;
            r.tfr = p.tfr;
            results[config_id(p.alpha, p.beta)] = r;
          }
          points = join_results(enumerate_points(*cfg->sweep), results);
        }
        emit_text(g, render_sweep(points, select_best(points), fmt));
      }
    } else if (agreement->parsed()) {
      const auto fmt = parse_report_format(format_or(g, "markdown"));
      emit_text(g, render_agreement(agreement_report(ingest_labels(labels_path), judge), fmt));
    } else if (simulate->parsed()) {
      const auto cfg = require_config(g);
      if (!cfg.sweep) throw Error(Errc::config_error, "simulate needs a [sweep] section");
      const SimulateSection sim = cfg.simulate.value_or(SimulateSection{});
      std::vector<std::string> names{sim.target, sim.trigger};
      names.insert(names.end(), sim.extra_concepts.begin(), sim.extra_concepts.end());
      const auto space = build_space(sim.seed, sim.dim, names);
      std::vector<CaseTrace> trace;
      const auto points = run_sim(space, sim.trigger, sim.target, *cfg.sweep, sim.settings,
                                  trace_path.empty() ? nullptr : &trace);
      if (!trace_path.empty()) {
        std::ofstream out(trace_path);
        if (!out) throw Error(Errc::io_failure, "cannot write " + trace_path);
        out << "point,case,alpha,beta,cos_target,cos_trigger,looks_like_target,looks_like_trigger\n";
        out.precision(17);
        for (const auto& t : trace) {
          out << t.point << ',' << t.case_index << ',' << t.alpha << ',' << t.beta << ',' << t.verdict.cos_target << ','
              << t.verdict.cos_trigger << ',' << t.verdict.looks_like_target << ',' << t.verdict.looks_like_trigger
              << '\n';
        }
      }
      emit_text(g, render_sweep(points, select_best(points), parse_report_format(format_or(g, "markdown"))));
    } else if (serve->parsed()) {
      auto cfg = require_config(g);
      auto registry = std::make_shared<const AttackRegistry>(std::move(cfg.attacks));
      if (use_stdio) {
        serve_stream(std::cin, std::cout, *registry);
      } else {
        if (listen.empty()) throw CLI::ValidationError("serve", "pass --listen host:port or --stdio");
        const auto [host, port] = parse_endpoint(listen);
        // Signals are taken synchronously on a helper thread; workers inherit the mask.
        sigset_t stop_signals;
        sigemptyset(&stop_signals);
        sigaddset(&stop_signals, SIGINT);
        sigaddset(&stop_signals, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
        TcpServer server(host, port, registry);
        std::thread waiter([&] {
          int sig = 0;
          sigwait(&stop_signals, &sig);
          server.stop();
        });
        std::cerr << "listening on " << host << ':' << server.port() << std::endl;
        server.run();
        waiter.join();
      }
    } else if (queries->parsed()) {
      const auto fmt = parse_manifest_format(format_or(g, "jsonl"));
      emit_text(g, render_queries(emit_queries(read_query_cells(cells_path)), fmt));
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << errc_name(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
