// rrag: the retrieval-augmented rationale pipeline as composable subcommands.
//
// Every subcommand reads its inputs, writes fixed-name artifacts into the
// output directory, and records a <command>.manifest.json next to them.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "rrag/corpus.hpp"
#include "rrag/error.hpp"
#include "rrag/evaluation.hpp"
#include "rrag/hash.hpp"
#include "rrag/inference.hpp"
#include "rrag/learning.hpp"
#include "rrag/lm.hpp"
#include "rrag/prompting.hpp"
#include "rrag/retrieval.hpp"
#include "rrag/synthesis.hpp"

#ifndef RRAG_VERSION
#define RRAG_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace rrag;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartial = 3;

// Artifact file names inside the output directory.
constexpr const char* kIndexFile = "index.bin";
constexpr const char* kRetrievalsFile = "retrievals.jsonl";
constexpr const char* kRationalesFile = "rationales.jsonl";
constexpr const char* kAugmentedFile = "augmented.jsonl";
constexpr const char* kDemosFile = "demonstrations.jsonl";
constexpr const char* kSftFile = "sft.jsonl";
constexpr const char* kGenerationsFile = "generations.jsonl";
constexpr const char* kJudgmentsFile = "judgments.jsonl";
constexpr const char* kReportFile = "report.json";

struct EndpointFlags {
  std::string model;
  std::string url;
  std::string api_key_env;
};

struct Settings {
  std::string out_dir = "out";
  std::string corpus;
  std::string corpus_format = "auto";
  std::string qa;
  std::string task = "popqa";
  std::string retrievals;
  std::string cache;
  std::string instruction_file;
  double k1 = 0.9;
  double b = 0.4;
  int top_k = 0;
  bool body_only = false;
  bool stem = false;
  bool stopwords = false;
  std::size_t word_cap = 120;
  bool strict_word_cap = false;
  std::uint64_t seed = 0;
  int parallelism = 8;
  EndpointFlags generator;
  EndpointFlags inference;
  EndpointFlags judge;
  int timeout_ms = 60000;
  int max_retries = 3;
  int max_in_flight = 8;
  std::string log_level = "warn";

  // Subcommand settings.
  int depth = 0;
  std::string import_from;
  std::string variant = "with-both";
  std::string policy = "keep-all";
  int n_demos = 2;
  std::string demo_scope = "global";
  std::string mode = "ralm";
  int k_docs = 0;
  int max_new_tokens = 0;
  std::size_t max_prompt_chars = 0;
  std::vector<int> k_values;
  std::vector<int> n_values{0, 1, 2};
  std::string sweep_mode;
  bool verbatim = false;
  int retrieval_k = 0;
  bool with_judge = false;
  bool no_accuracy = false;
  bool no_str_em = false;
};

corpus::TaskTag task_of(const Settings& s) { return corpus::parse_task_tag(s.task); }

int top_k_of(const Settings& s) {
  if (s.top_k < 0) throw ArgumentError("--top-k must be positive");
  return s.top_k > 0 ? s.top_k : corpus::default_top_k(task_of(s));
}

fs::path out_path(const Settings& s, const char* name) { return fs::path(s.out_dir) / name; }

void require_flag(const std::string& value, const char* flag) {
  if (value.empty()) throw ArgumentError(std::string("missing required setting ") + flag);
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw ReferentialError(std::string(what) + " '" + path.string() + "' does not exist");
  }
}

// A missing upstream artifact names the subcommand that produces it.
void require_artifact(const fs::path& path, const char* producer) {
  if (!fs::is_regular_file(path)) {
    throw ReferentialError(fmt::format("missing artifact '{}'; run `rrag {}` first", path.string(), producer));
  }
}

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  void input(const std::string& role, const fs::path& path) {
    inputs_[role] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
  }

  void output(const fs::path& path) { outputs_.push_back(path); }

  void write(const Settings& s, const ordered_json& config_snapshot) const {
    ordered_json outputs = ordered_json::object();
    for (const auto& p : outputs_) outputs[p.filename().string()] = sha256_file(p);
    const ordered_json manifest{
        {"command", command_},
        {"versions", {{"rrag", RRAG_VERSION}, {"templates", sha256_hex(prompting::dump_templates())}}},
        {"inputs", inputs_},
        {"config", config_snapshot},
        {"outputs", std::move(outputs)}};
    std::ofstream out(out_path(s, "") / (command_ + ".manifest.json"), std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write manifest for " + command_);
  }

 private:
  std::string command_;
  ordered_json inputs_ = ordered_json::object();
  std::vector<fs::path> outputs_;
};

struct Context {
  Settings& settings;
  Manifest manifest;
  std::optional<corpus::CorpusStore> corpus_store;
  std::optional<std::vector<corpus::QASample>> dataset;

  const corpus::CorpusStore& corpus() {
    if (!corpus_store) {
      require_flag(settings.corpus, "--corpus");
      require_file(settings.corpus, "corpus");
      const auto format = settings.corpus_format == "auto" ? corpus::detect_corpus_format(settings.corpus)
                                                           : corpus::parse_corpus_format(settings.corpus_format);
      corpus_store = corpus::ingest_corpus(settings.corpus, format,
                                           {settings.word_cap, settings.strict_word_cap});
      for (const auto& w : corpus_store->warnings()) spdlog::warn("{}", w);
      manifest.input("corpus", settings.corpus);
    }
    return *corpus_store;
  }

  const std::vector<corpus::QASample>& qa() {
    if (!dataset) {
      require_flag(settings.qa, "--qa");
      require_file(settings.qa, "QA file");
      dataset = corpus::ingest_qa(settings.qa, task_of(settings));
      manifest.input("qa", settings.qa);
    }
    return *dataset;
  }

  retrieval::RetrievalMap retrievals() {
    const fs::path path = settings.retrievals.empty() ? out_path(settings, kRetrievalsFile)
                                                      : fs::path(settings.retrievals);
    if (!fs::is_regular_file(path)) {
      throw ReferentialError(fmt::format(
          "missing artifact '{}'; run `rrag retrieve` or `rrag import-retrieval` first", path.string()));
    }
    auto map = retrieval::import_retrieval(path, corpus());
    manifest.input("retrievals", path);
    return map;
  }

  synthesis::AugmentedDataset augmented() {
    const auto path = out_path(settings, kAugmentedFile);
    require_artifact(path, "augment");
    manifest.input("augmented", path);
    return synthesis::read_augmented(path);
  }

  std::vector<inference::GenerationRecord> generations() {
    const auto path = out_path(settings, kGenerationsFile);
    require_artifact(path, "infer");
    manifest.input("generations", path);
    return inference::read_generations(path);
  }
};

std::shared_ptr<lm::LanguageModel> make_model(const Settings& s, const EndpointFlags& flags, const char* role,
                                              Context& ctx) {
  if (flags.model.empty()) {
    throw ConfigurationError(fmt::format(
        "no {0} model configured; set --{0}-model to a served model name (with --{0}-url) or to "
        "mock:extractive, mock:echo, mock:refuse or mock:scripted=<file>",
        role));
  }
  if (flags.url.empty() && flags.model.rfind("mock:", 0) == 0) {
    const std::string kind = flags.model.substr(5);
    if (kind == "extractive") return lm::MockModel::extractive(ctx.qa(), flags.model);
    if (kind == "echo") return lm::MockModel::echo(flags.model);
    if (kind == "refuse") return lm::MockModel::refuse(flags.model);
    if (kind.rfind("scripted=", 0) == 0) {
      const fs::path script = kind.substr(9);
      require_file(script, "scripted replies");
      ctx.manifest.input(std::string(role) + "_script", script);
      return lm::MockModel::scripted_from_file(script, "mock:scripted");
    }
    throw ConfigurationError("unknown mock model '" + flags.model + "'");
  }
  if (flags.url.empty()) {
    throw ConfigurationError(fmt::format("--{0}-url is required for model '{1}'", role, flags.model));
  }
  lm::EndpointConfig config;
  config.base_url = flags.url;
  config.model_name = flags.model;
  config.api_key_env = flags.api_key_env;
  config.timeout = std::chrono::milliseconds(s.timeout_ms);
  config.max_retries = s.max_retries;
  config.max_in_flight = s.max_in_flight;
  return std::make_shared<lm::HttpChatModel>(config);
}

lm::Gateway make_gateway(const Settings& s, const EndpointFlags& flags, const char* role, Context& ctx) {
  std::shared_ptr<const lm::ResponseCache> cache;
  if (!s.cache.empty()) cache = std::make_shared<lm::ResponseCache>(s.cache);
  return lm::Gateway(make_model(s, flags, role, ctx), std::move(cache));
}

// Some samples failed: partial. Every sample failed: runtime failure.
int finish_failures(const std::vector<synthesis::SampleFailure>& failures, std::size_t succeeded,
                    const fs::path& path, Context& ctx) {
  synthesis::write_failures(failures, path);
  ctx.manifest.output(path);
  for (const auto& f : failures) spdlog::error("{}: {}", f.sample_id, f.message);
  if (failures.empty()) return 0;
  return succeeded == 0 ? kExitRuntime : kExitPartial;
}

std::string provenance_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::stoll(epoch));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inference::InferenceJob make_job(const Settings& s, inference::Mode mode) {
  auto job = inference::InferenceJob::for_mode(mode, s.k_docs > 0 ? s.k_docs : top_k_of(s));
  if (mode == inference::Mode::kZeroShot) job.k_docs = 0;
  job.icl = {s.n_demos, s.seed, learning::parse_demo_scope(s.demo_scope)};
  if (s.max_new_tokens > 0) job.decode.max_new_tokens = s.max_new_tokens;
  job.parallelism = s.parallelism;
  job.max_prompt_chars = s.max_prompt_chars;
  return job;
}

// Global keys plus the keys of the running subcommand.
// Effective configuration as key -> value: global keys plus the chosen
// subcommand's. Values are TOML literals, which are JSON for every type used.
ordered_json config_snapshot(const CLI::App& app, const std::string& command) {
  std::istringstream lines(app.config_to_str(true, false));
  ordered_json out = ordered_json::object();
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const auto dot = key.find('.');
    if (dot != std::string::npos && key.compare(0, dot, command) != 0) continue;
    const std::string value = line.substr(eq + 1);
    out[key] = ordered_json::parse(value, nullptr, false);
    if (out[key].is_discarded()) out[key] = value;
  }
  return out;
}

std::string format_ratio(double v) { return fmt::format("{:.4f}", v); }

// ---------------------------------------------------------------------------
// Subcommands. Each returns the process exit status.

int cmd_index(Context& ctx) {
  retrieval::Bm25Params params;
  params.k1 = ctx.settings.k1;
  params.b = ctx.settings.b;
  params.index_title = !ctx.settings.body_only;
  params.tokenizer = {ctx.settings.stem, ctx.settings.stopwords};
  const auto index = retrieval::InvertedIndex::build(ctx.corpus(), params);
  const auto path = out_path(ctx.settings, kIndexFile);
  index.save(path);
  ctx.manifest.output(path);
  std::cout << fmt::format("indexed {} documents, {} terms\n", index.doc_count(), index.postings().size());
  return 0;
}

int cmd_retrieve(Context& ctx) {
  const auto index_path = out_path(ctx.settings, kIndexFile);
  require_artifact(index_path, "index");
  ctx.manifest.input("index", index_path);
  const auto index = retrieval::InvertedIndex::load(index_path);
  std::vector<retrieval::Query> queries;
  for (const auto& s : ctx.qa()) queries.push_back({s.sample_id, s.question});
  const int depth = ctx.settings.depth > 0 ? ctx.settings.depth : std::max(10, top_k_of(ctx.settings));
  const auto sets = retrieval::search_batch(index, queries, depth, ctx.settings.parallelism);
  const auto path = out_path(ctx.settings, kRetrievalsFile);
  retrieval::export_retrieval(sets, path);
  ctx.manifest.output(path);
  std::cout << fmt::format("retrieved top-{} for {} queries\n", depth, sets.size());
  return 0;
}

int cmd_import_retrieval(Context& ctx) {
  require_flag(ctx.settings.import_from, "--from");
  require_file(ctx.settings.import_from, "retrieval file");
  const auto map = retrieval::import_retrieval(ctx.settings.import_from, ctx.corpus());
  ctx.manifest.input("retrieval_source", ctx.settings.import_from);
  std::size_t missing = 0;
  for (const auto& s : ctx.qa()) missing += map.contains(s.sample_id) ? 0 : 1;
  if (missing > 0) spdlog::warn("{} QA samples have no retrieval", missing);
  const auto path = out_path(ctx.settings, kRetrievalsFile);
  retrieval::export_retrieval(map, path);
  ctx.manifest.output(path);
  std::cout << fmt::format("imported {} retrieval sets\n", map.size());
  return 0;
}

prompting::TaskInstruction instruction_for(Context& ctx) {
  if (!ctx.settings.instruction_file.empty()) {
    require_file(ctx.settings.instruction_file, "instruction file");
    std::ifstream in(ctx.settings.instruction_file, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    ctx.manifest.input("instruction", ctx.settings.instruction_file);
    return prompting::custom_instruction(std::move(text));
  }
  return prompting::builtin_instruction(task_of(ctx.settings));
}

int cmd_synthesize(Context& ctx) {
  const auto& s = ctx.settings;
  const auto kind = synthesis::parse_rationale_kind(s.variant);
  const int top_k = top_k_of(s);
  std::vector<synthesis::Rationale> rationales;
  std::vector<synthesis::SampleFailure> failures;
  if (kind == synthesis::RationaleKind::kTemplate) {
    rationales = synthesis::synthesize_templates(ctx.qa(), ctx.corpus(), ctx.retrievals(), top_k);
  } else {
    const auto variant = prompting::parse_rationale_variant(s.variant);
    const auto instruction = instruction_for(ctx);
    auto gateway = make_gateway(s, s.generator, "generator", ctx);
    retrieval::RetrievalMap retrievals;
    if (variant != prompting::RationaleVariant::kNoDocs) retrievals = ctx.retrievals();
    synthesis::SynthesisOptions options;
    options.top_k = top_k;
    options.parallelism = s.parallelism;
    if (s.max_new_tokens > 0) options.decode.max_new_tokens = s.max_new_tokens;
    auto result = synthesis::synthesize(ctx.qa(), variant == prompting::RationaleVariant::kNoDocs
                                                      ? corpus::CorpusStore{}
                                                      : ctx.corpus(),
                                        retrievals, gateway, variant, instruction, options);
    rationales = std::move(result.rationales);
    failures = std::move(result.failures);
  }
  const auto path = out_path(s, kRationalesFile);
  synthesis::write_rationales(rationales, path);
  ctx.manifest.output(path);
  std::string ratio = "n/a";
  std::string relevant_ratio = "n/a";
  try {
    ratio = format_ratio(synthesis::consistency_ratio(rationales, false));
    relevant_ratio = format_ratio(synthesis::consistency_ratio(rationales, true));
  } catch (const StatisticsError&) {
  }
  std::cout << fmt::format("rationales: {}\nfailures: {}\nconsistency: {}\nconsistency (relevant doc present): {}\n",
                           rationales.size(), failures.size(), ratio, relevant_ratio);
  return finish_failures(failures, rationales.size(), out_path(s, "rationale_failures.jsonl"), ctx);
}

int cmd_augment(Context& ctx) {
  const auto rationales_path = out_path(ctx.settings, kRationalesFile);
  require_artifact(rationales_path, "synthesize");
  ctx.manifest.input("rationales", rationales_path);
  const auto rationales = synthesis::read_rationales(rationales_path);
  synthesis::Provenance provenance;
  provenance.model = rationales.empty() ? std::string("none") : rationales.front().model;
  provenance.kind = rationales.empty() ? synthesis::RationaleKind::kWithBoth : rationales.front().kind;
  provenance.timestamp = provenance_timestamp();
  const auto aug = synthesis::augment(ctx.qa(), rationales, synthesis::parse_augment_policy(ctx.settings.policy),
                                      provenance);
  const auto path = out_path(ctx.settings, kAugmentedFile);
  synthesis::write_augmented(aug, path);
  ctx.manifest.output(path);
  std::cout << fmt::format("augmented pairs: {} of {} samples\n", aug.pairs.size(), ctx.qa().size());
  return 0;
}

int cmd_build_icl(Context& ctx) {
  const auto aug = ctx.augmented();
  const learning::ICLConfig config{ctx.settings.n_demos, ctx.settings.seed, learning::DemoScope::kGlobal};
  const auto demos = learning::sample_demonstrations(aug, config);
  const auto path = out_path(ctx.settings, kDemosFile);
  learning::write_demonstrations(demos, path);
  ctx.manifest.output(path);
  std::cout << fmt::format("sampled {} demonstrations with seed {}\n", demos.size(), ctx.settings.seed);
  return 0;
}

int cmd_export_sft(Context& ctx) {
  const auto aug = ctx.augmented();
  const auto path = out_path(ctx.settings, kSftFile);
  const auto count = learning::export_sft(aug, ctx.corpus(), ctx.retrievals(), top_k_of(ctx.settings), path);
  ctx.manifest.output(path);
  std::cout << fmt::format("exported {} training records\n", count);
  return 0;
}

struct InferenceInputs {
  retrieval::RetrievalMap retrievals;
  std::optional<synthesis::AugmentedDataset> aug;
};

InferenceInputs inference_inputs(Context& ctx, inference::Mode mode) {
  InferenceInputs in;
  if (mode != inference::Mode::kZeroShot) in.retrievals = ctx.retrievals();
  if (inference::uses_demonstrations(mode)) in.aug = ctx.augmented();
  return in;
}

const corpus::CorpusStore& corpus_for(Context& ctx, inference::Mode mode) {
  static const corpus::CorpusStore kEmpty;
  return mode == inference::Mode::kZeroShot ? kEmpty : ctx.corpus();
}

int cmd_infer(Context& ctx) {
  const auto mode = inference::parse_mode(ctx.settings.mode);
  const auto job = make_job(ctx.settings, mode);
  auto in = inference_inputs(ctx, mode);
  auto gateway = make_gateway(ctx.settings, ctx.settings.inference, "inference", ctx);
  const auto result = inference::run(job, ctx.qa(), corpus_for(ctx, mode), in.retrievals,
                                     in.aug ? &*in.aug : nullptr, gateway);
  const auto path = out_path(ctx.settings, kGenerationsFile);
  inference::write_generations(result.records, path);
  ctx.manifest.output(path);
  std::cout << fmt::format("generations: {}\nfailures: {}\n", result.records.size(), result.failures.size());
  return finish_failures(result.failures, result.records.size(), out_path(ctx.settings, "generation_failures.jsonl"), ctx);
}

void write_sweep(Context& ctx, const std::vector<inference::SweepRow>& rows, const char* name) {
  const auto csv = inference::sweep_csv(rows);
  const auto path = out_path(ctx.settings, name);
  std::ofstream out(path, std::ios::binary);
  out << csv;
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
  ctx.manifest.output(path);
  std::cout << csv;
}

int cmd_sweep_docs(Context& ctx) {
  const auto mode = inference::parse_mode(ctx.settings.sweep_mode.empty() ? "ralm" : ctx.settings.sweep_mode);
  if (mode == inference::Mode::kZeroShot) throw ArgumentError("sweep-docs needs a mode that shows documents");
  auto k_values = ctx.settings.k_values;
  if (k_values.empty()) {
    for (int k = 1; k <= 10; ++k) k_values.push_back(k);
  }
  const auto job = make_job(ctx.settings, mode);
  auto in = inference_inputs(ctx, mode);
  auto gateway = make_gateway(ctx.settings, ctx.settings.inference, "inference", ctx);
  const auto rows = inference::sweep_documents(job, ctx.qa(), ctx.corpus(), in.retrievals,
                                               in.aug ? &*in.aug : nullptr, gateway, k_values);
  write_sweep(ctx, rows, "sweep_docs.csv");
  return 0;
}

int cmd_sweep_demos(Context& ctx) {
  const auto mode =
      inference::parse_mode(ctx.settings.sweep_mode.empty() ? "instruct-icl" : ctx.settings.sweep_mode);
  if (!inference::uses_demonstrations(mode)) throw ArgumentError("sweep-demos needs a mode with demonstrations");
  const auto job = make_job(ctx.settings, mode);
  auto in = inference_inputs(ctx, mode);
  auto gateway = make_gateway(ctx.settings, ctx.settings.inference, "inference", ctx);
  const auto rows = inference::sweep_demos(job, ctx.qa(), ctx.corpus(), in.retrievals, *in.aug, gateway,
                                           ctx.settings.n_values);
  write_sweep(ctx, rows, "sweep_demos.csv");
  return 0;
}

int cmd_judge(Context& ctx) {
  const auto generations = ctx.generations();
  auto gateway = make_gateway(ctx.settings, ctx.settings.judge, "judge", ctx);
  const auto run = evaluation::judge_generations(gateway, ctx.qa(), generations, ctx.settings.verbatim,
                                                 ctx.settings.parallelism);
  const auto path = out_path(ctx.settings, kJudgmentsFile);
  evaluation::write_judgments(run.records, path);
  ctx.manifest.output(path);
  std::map<evaluation::Verdict, std::size_t> counts;
  for (const auto& r : run.records) ++counts[r.verdict];
  std::cout << fmt::format("aligned: {}\nnot aligned: {}\nunparseable: {}\nfailures: {}\n",
                           counts[evaluation::Verdict::kAligned], counts[evaluation::Verdict::kNotAligned],
                           counts[evaluation::Verdict::kUnparseable], run.failures.size());
  return finish_failures(run.failures, run.records.size(), out_path(ctx.settings, "judge_failures.jsonl"), ctx);
}

int cmd_eval(Context& ctx) {
  const auto& s = ctx.settings;
  evaluation::MetricSelection selection;
  selection.accuracy = !s.no_accuracy;
  selection.str_em = !s.no_str_em;
  selection.retrieval_k = s.retrieval_k;
  selection.judge = s.with_judge;
  if (selection.retrieval_k < 0) throw ArgumentError("--retrieval-k must not be negative");
  const auto generations = ctx.generations();
  std::optional<retrieval::RetrievalMap> retrievals;
  if (selection.retrieval_k > 0) retrievals = ctx.retrievals();
  std::map<std::string, evaluation::Verdict, std::less<>> verdicts;
  if (selection.judge) {
    const auto path = out_path(s, kJudgmentsFile);
    require_artifact(path, "judge");
    ctx.manifest.input("judgments", path);
    for (const auto& r : evaluation::read_judgments(path)) verdicts[r.sample_id] = r.verdict;
  }
  const ordered_json config{{"task", s.task},
                            {"generations", kGenerationsFile},
                            {"model", generations.empty() ? std::string() : generations.front().model},
                            {"mode", generations.empty() ? std::string()
                                                         : std::string(inference::to_string(generations.front().mode))}};
  const auto report = evaluation::aggregate(generations, ctx.qa(), selection.retrieval_k > 0 ? &ctx.corpus() : nullptr,
                                            retrievals ? &*retrievals : nullptr, selection, verdicts, config);
  const auto path = out_path(s, kReportFile);
  std::ofstream out(path, std::ios::binary);
  out << evaluation::to_json(report).dump(2) << '\n';
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
  ctx.manifest.output(path);
  std::cout << evaluation::summary_text(report);
  return 0;
}

int cmd_dump_templates(Context& ctx) {
  const auto text = prompting::dump_templates();
  const auto path = out_path(ctx.settings, "templates.txt");
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  ctx.manifest.output(path);
  std::cout << text;
  return 0;
}

int cmd_check_qa(Context& ctx) {
  const auto& samples = ctx.qa();
  const auto task = task_of(ctx.settings);
  std::cout << fmt::format("samples: {}\ntask: {}\n", samples.size(), corpus::to_string(task));
  if (const auto test = corpus::reference_split_size(task, corpus::Split::kTest)) {
    std::cout << fmt::format("reference test split: {}\n", *test);
  }
  return 0;
}

bool is_flag(const CLI::Option* opt) { return opt->get_expected_max() == 0; }

// Base type only; enumerated choices are already in the description.
std::string option_type(const CLI::Option* opt) {
  if (is_flag(opt)) return "bool";
  std::string name = opt->get_type_name();
  if (const auto colon = name.find(':'); colon != std::string::npos) name.resize(colon);
  if (name.empty()) name = "TEXT";
  return opt->get_expected_max() > 1 ? name + " list" : name;
}

void dump_schema(const CLI::App& app, const std::string& section, std::ostream& out) {
  bool header = false;
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (!header) {
      out << (section.empty() ? "# global keys\n" : "\n[" + section + "]\n");
      header = true;
    }
    const std::string def = is_flag(opt) ? "false" : opt->get_default_str();
    out << fmt::format("{:<22} {:<8} {:<18} {}\n", name, option_type(opt), def.empty() ? "\"\"" : def,
                       opt->get_description());
  }
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  CLI::App app{"Retrieval-augmented QA with model-written rationales"};
  app.set_version_flag("--version", RRAG_VERSION);
  app.set_config("--config", "", "Key-value run configuration (TOML/INI); flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--out-dir", s.out_dir, "Directory for artifacts and manifests")->capture_default_str();
  app.add_option("--corpus", s.corpus, "Passage corpus (DPR TSV or JSONL)");
  app.add_option("--corpus-format", s.corpus_format, "auto, tsv or jsonl")
      ->check(CLI::IsMember({"auto", "tsv", "jsonl"}))->capture_default_str();
  app.add_option("--qa", s.qa, "QA dataset JSONL");
  app.add_option("--task", s.task, "popqa, triviaqa, nq, asqa, 2wikimultihop or custom")
      ->check(CLI::IsMember({"popqa", "triviaqa", "nq", "asqa", "2wikimultihop", "custom"}))
      ->capture_default_str();
  app.add_option("--retrievals", s.retrievals, "Retrieval JSONL to read (default <out-dir>/retrievals.jsonl)");
  app.add_option("--cache", s.cache, "Response cache directory; empty disables caching");
  app.add_option("--instruction-file", s.instruction_file, "Rationale instruction text for custom tasks");
  app.add_option("--k1", s.k1, "BM25 term saturation")->capture_default_str();
  app.add_option("--b", s.b, "BM25 length normalization")->capture_default_str();
  app.add_option("--top-k", s.top_k, "Documents per sample (K); 0 uses the task default")->capture_default_str();
  app.add_flag("--body-only", s.body_only, "Index passage bodies without titles");
  app.add_flag("--stem", s.stem, "Porter-stem index and query terms");
  app.add_flag("--stopwords", s.stopwords, "Drop English stopwords when indexing");
  app.add_option("--word-cap", s.word_cap, "Warn about passages longer than this many words")
      ->capture_default_str();
  app.add_flag("--strict-word-cap", s.strict_word_cap, "Reject passages over the word cap");
  app.add_option("--seed", s.seed, "Seed for demonstration sampling")->capture_default_str();
  app.add_option("--parallelism", s.parallelism, "Concurrent model requests")->capture_default_str();
  for (auto [role, flags] : {std::pair{"generator", &s.generator}, std::pair{"inference", &s.inference},
                             std::pair{"judge", &s.judge}}) {
    const std::string r = role;
    app.add_option("--" + r + "-model", flags->model,
                   "Model for the " + r + " role: served model name, or mock:extractive|echo|refuse|scripted=<file>");
    app.add_option("--" + r + "-url", flags->url, "Chat-completions base URL for the " + r + " role");
    app.add_option("--" + r + "-api-key-env", flags->api_key_env,
                   "Environment variable holding the " + r + " API key");
  }
  app.add_option("--timeout-ms", s.timeout_ms, "Per-request timeout")->capture_default_str();
  app.add_option("--max-retries", s.max_retries, "Retries for transient endpoint failures")->capture_default_str();
  app.add_option("--max-in-flight", s.max_in_flight, "Concurrent requests per endpoint")->capture_default_str();
  app.add_option("--log-level", s.log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  std::map<CLI::App*, std::pair<std::string, int (*)(Context&)>> commands;
  auto add = [&](const char* name, const char* help, int (*fn)(Context&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    commands[sub] = {name, fn};
    return sub;
  };

  add("index", "Build the BM25 index from --corpus", cmd_index);
  add("retrieve", "Retrieve documents for every QA sample", cmd_retrieve)
      ->add_option("--depth", s.depth, "Documents kept per query; 0 means max(10, K)")
      ->capture_default_str();
  add("import-retrieval", "Validate and import externally produced retrieval results", cmd_import_retrieval)
      ->add_option("--from", s.import_from, "Retrieval results JSONL");
  auto* synth = add("synthesize", "Generate a rationale for every QA sample", cmd_synthesize);
  synth->add_option("--variant", s.variant, "with-both, no-answer, no-docs or template")
      ->check(CLI::IsMember({"with-both", "no-answer", "no-docs", "template"}))
      ->capture_default_str();
  synth->add_option("--max-new-tokens", s.max_new_tokens, "Generation budget; 0 keeps 512")->capture_default_str();
  add("augment", "Pair QA samples with their rationales", cmd_augment)
      ->add_option("--policy", s.policy, "keep-all or keep-consistent")
      ->check(CLI::IsMember({"keep-all", "keep-consistent"}))
      ->capture_default_str();
  add("build-icl", "Sample demonstrations from the augmented dataset", cmd_build_icl)
      ->add_option("--n-demos", s.n_demos, "Demonstrations to sample")
      ->capture_default_str();
  add("export-sft", "Write chat-format fine-tuning records", cmd_export_sft);
  auto* infer = add("infer", "Answer every QA sample", cmd_infer);
  infer->add_option("--mode", s.mode, "zero-shot, ralm, few-shot-qa, instruct-icl or instruct-ft")
      ->check(CLI::IsMember({"zero-shot", "ralm", "few-shot-qa", "instruct-icl", "instruct-ft"}))
      ->capture_default_str();
  for (CLI::App* sub : {infer, add("sweep-docs", "Accuracy and precision for each number of documents", cmd_sweep_docs),
                        add("sweep-demos", "Accuracy for each number of demonstrations", cmd_sweep_demos)}) {
    sub->add_option("--k-docs", s.k_docs, "Documents shown; 0 uses K")->capture_default_str();
    sub->add_option("--n-demos", s.n_demos, "Demonstrations per prompt")->capture_default_str();
    sub->add_option("--demo-scope", s.demo_scope, "global or per-query")
        ->check(CLI::IsMember({"global", "per-query"}))
        ->capture_default_str();
    sub->add_option("--max-new-tokens", s.max_new_tokens, "Generation budget; 0 uses the mode default")->capture_default_str();
    sub->add_option("--max-prompt-chars", s.max_prompt_chars, "Reject longer prompts; 0 disables")->capture_default_str();
  }
  app.get_subcommand("sweep-docs")->add_option("--k-values", s.k_values, "Document counts (default 1..10)")
      ->delimiter(',');
  app.get_subcommand("sweep-docs")->add_option("--mode", s.sweep_mode, "Inference mode (default ralm)");
  app.get_subcommand("sweep-demos")->add_option("--n-values", s.n_values, "Demonstration counts")
      ->delimiter(',')->capture_default_str();
  app.get_subcommand("sweep-demos")->add_option("--mode", s.sweep_mode, "Inference mode (default instruct-icl)");
  add("judge", "Grade generations with a judge model", cmd_judge)
      ->add_flag("--verbatim", s.verbatim, "Send the judge prompt without the verdict-line suffix");
  auto* eval = add("eval", "Score generations", cmd_eval);
  eval->add_option("--retrieval-k", s.retrieval_k, "Also report recall/precision at this depth; 0 skips")
      ->capture_default_str();
  eval->add_flag("--with-judge", s.with_judge, "Include judge verdicts from judgments.jsonl");
  eval->add_flag("--no-accuracy", s.no_accuracy, "Skip accuracy");
  eval->add_flag("--no-str-em", s.no_str_em, "Skip str-em");
  add("dump-templates", "Print every prompt template", cmd_dump_templates);
  add("check-qa", "Validate a QA file", cmd_check_qa);
  app.add_subcommand("config-schema", "Print the configuration keys, types and defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  auto logger = spdlog::stderr_color_mt("rrag");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(s.log_level));

  if (app.got_subcommand("config-schema")) {
    dump_schema(app, "", std::cout);
    for (const CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) {
      dump_schema(*sub, sub->get_name(), std::cout);
    }
    return 0;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const auto& [name, fn] = commands.at(chosen);
  try {
    fs::create_directories(s.out_dir);
    Context ctx{s, Manifest(name), std::nullopt, std::nullopt};
    const int status = fn(ctx);
    ctx.manifest.write(s, config_snapshot(app, name));
    return status;
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.kind()), e.what());
    return e.is_runtime() ? kExitRuntime : kExitValidation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
}
