#include "udiff/cli.hpp"

#include "log.hpp"
#include "udiff/checkpoint.hpp"
#include "udiff/data.hpp"
#include "udiff/evaluator.hpp"
#include "udiff/logit_model.hpp"
#include "udiff/sampler.hpp"
#include "udiff/trainer.hpp"
#include "udiff/verify.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

namespace udiff {

namespace {

using nlohmann::json;

struct Loaded {
    Checkpoint checkpoint;
    Tokenizer tokenizer;
};

Loaded load_for_inference(const std::string& path) {
    Loaded l{load_checkpoint(path), {}};
    const auto meta = json::parse(l.checkpoint.metadata_json);
    if (!meta.contains("tokenizer")) throw std::runtime_error("checkpoint has no tokenizer metadata");
    l.tokenizer = Tokenizer::from_json(meta.at("tokenizer"));
    if (l.tokenizer.size() != l.checkpoint.model.vocab_size)
        throw std::runtime_error("checkpoint tokenizer does not match the model vocabulary");
    return l;
}

struct TrainArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool resume = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    RunConfig config = load_run_config(a.config);
    if (a.seed) config.seed = *a.seed;
    config.train.seed = config.seed;
    config.validate();

    const std::string text = read_text_file(config.data_path);
    const Tokenizer tokenizer = Tokenizer::build(text);
    if (config.model.vocab_size != 0 && config.model.vocab_size != tokenizer.size())
        throw std::invalid_argument("model.vocab_size " + std::to_string(config.model.vocab_size) +
                                    " does not match the corpus vocabulary " + std::to_string(tokenizer.size()));
    config.model.vocab_size = tokenizer.size();
    config.model.validate();

    const auto tokens = tokenizer.encode(text);
    const int stride = config.stride > 0 ? config.stride : config.model.context_length;
    auto split = split_windows(chunk_corpus(tokens, config.model.context_length, stride));
    log().info("corpus: {} tokens, V = {}, {} train / {} validation windows", tokens.size(), tokenizer.size(),
               split.train.size(), split.val.size());

    const json metadata{{"tokenizer", tokenizer.to_json()}, {"run_config", json::parse(serialize_run_config(config))}};

    TrainState state;
    const auto latest = config.output_dir / "latest.udif";
    if (a.resume && std::filesystem::exists(latest)) {
        const auto ckpt = load_checkpoint(latest);
        if (!(ckpt.model == config.model)) throw std::invalid_argument("checkpoint model config differs from the run config");
        state = restore_train_state(ckpt);
        log().info("resuming from step {}", state.step);
    } else {
        state = make_train_state(config.model, config.train);
    }
    log().info("model: {} parameters", count_params(state.params));

    LoopOptions options;
    options.output_dir = config.output_dir;
    options.metadata_json = metadata.dump();
    train_loop(state, config.train, split.train, split.val, options);
    out << json{{"step", state.step}, {"checkpoint", latest.string()}}.dump() << '\n';
    return 0;
}

struct SampleArgs {
    std::string checkpoint;
    int steps = 0;
    int num = 1;
    std::optional<int> length;
    std::optional<std::uint64_t> seed;
    double temperature = 1.0;
    std::string final_decode = "argmax";
    bool raw_tokens = false;
    bool ascii = false;
    bool raw_params = false;
};

SampleConfig sample_config(const SampleArgs& a, const Checkpoint& ckpt) {
    SampleConfig c;
    c.num_steps = a.steps;
    c.num_samples = a.num;
    c.context_length = a.length.value_or(ckpt.model.context_length);
    c.temperature = a.temperature;
    c.seed = a.seed.value_or(0);
    c.final_decode = parse_final_decode(a.final_decode);
    c.validate();
    return c;
}

int cmd_sample(const SampleArgs& a, std::ostream& out) {
    const auto loaded = load_for_inference(a.checkpoint);
    const auto& ckpt = loaded.checkpoint;
    const SampleConfig config = sample_config(a, ckpt);
    const DenoiserLogitModel model(a.raw_params ? ckpt.params : ckpt.ema.shadow);
    Rng rng(config.seed);
    const auto samples = sample(model, config, Vocab(ckpt.model.vocab_size), ckpt.train.noise(), rng);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (a.raw_tokens) {
            out << json(samples[i]).dump() << '\n';
            continue;
        }
        std::string text = loaded.tokenizer.decode(samples[i]);
        if (a.ascii) text = ascii_clean(text);
        out << json{{"index", i}, {"tokens", samples[i]}, {"text", text}}.dump() << '\n';
    }
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string samples_path;
    std::vector<std::string> scorer_cmd;
    SampleArgs sampling;
    int ngram_order = 3;
    int mc_samples = 8;
    int max_sequences = 64;
};

std::vector<TokenSequence> read_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read samples " + path);
    std::vector<TokenSequence> samples;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line);
        samples.push_back(j.is_array() ? j.get<TokenSequence>() : j.at("tokens").get<TokenSequence>());
    }
    return samples;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const auto loaded = load_for_inference(a.checkpoint);
    const auto& ckpt = loaded.checkpoint;
    const int v = ckpt.model.vocab_size;
    const auto tokens = loaded.tokenizer.encode(read_text_file(a.data));
    const auto split = split_windows(chunk_corpus(tokens, ckpt.model.context_length, ckpt.model.context_length));
    const DenoiserLogitModel model(ckpt.ema.shadow);
    Rng rng(a.sampling.seed.value_or(0));

    std::vector<TokenSequence> samples;
    if (!a.samples_path.empty()) {
        samples = read_samples(a.samples_path);
    } else {
        const SampleConfig config = sample_config(a.sampling, ckpt);
        samples = sample(model, config, Vocab(v), ckpt.train.noise(), rng);
    }
    for (const auto& s : samples)
        for (Token t : s)
            if (t < 0 || t >= v) throw std::invalid_argument("sample token outside the vocabulary");

    std::unique_ptr<ScorerModel> scorer;
    if (!a.scorer_cmd.empty()) scorer = std::make_unique<SubprocessScorer>(a.scorer_cmd);
    else scorer = std::make_unique<NgramScorer>(tokens, a.ngram_order, v);

    const auto gp = gen_ppl(samples, *scorer);
    std::span<const TokenSequence> val = split.val;
    if (a.max_sequences > 0 && val.size() > static_cast<std::size_t>(a.max_sequences))
        val = val.first(static_cast<std::size_t>(a.max_sequences));
    ElboOptions options;
    options.mc_time_samples = a.mc_samples;
    const auto elbo = elbo_ppl(model, val, ckpt.train.noise(), options, rng);

    MetricsReport report;
    report.gen_ppl = gp.gen_ppl;
    report.zero_prob_clamps = gp.clamped;
    report.entropy = avg_entropy(samples);
    report.elbo_ppl = elbo.ppl;
    report.elbo_std_error = elbo.std_error;
    report.sample_count = samples.size();
    report.mc_time_samples = elbo.mc_time_samples;
    out << report.to_json() << '\n';
    return 0;
}

int cmd_verify(std::uint64_t seed, std::ostream& out) {
    const auto results = run_oracles(seed);
    print_oracle_table(results, out);
    const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
    out << (ok ? "all oracles passed" : "oracle failures detected") << '\n';
    return ok ? 0 : 1;
}

void add_sampling_flags(CLI::App* cmd, SampleArgs& s) {
    cmd->add_option("--steps", s.steps, "Reverse diffusion steps")->check(CLI::PositiveNumber);
    cmd->add_option("--num", s.num, "Number of samples")->check(CLI::PositiveNumber);
    cmd->add_option("--length", s.length, "Sample length (defaults to the model context)")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", s.seed, "Random seed");
    cmd->add_option("--temperature", s.temperature, "Logit temperature")->check(CLI::PositiveNumber);
    cmd->add_option("--final-decode", s.final_decode, "argmax or sample")->check(CLI::IsMember({"argmax", "sample"}));
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Uniform-state discrete diffusion language model", "udiff"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a denoiser from a run config");
    train_cmd->add_option("--config", train.config, "Run config JSON")->required();
    train_cmd->add_option("--seed", train.seed, "Override the config seed");
    train_cmd->add_flag("--resume", train.resume, "Continue from latest.udif in the output directory");

    SampleArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "Generate text from a checkpoint");
    sample_cmd->add_option("--checkpoint", sample_args.checkpoint, "Checkpoint file")->required();
    add_sampling_flags(sample_cmd, sample_args);
    sample_cmd->get_option("--steps")->required();
    sample_cmd->add_flag("--raw-tokens", sample_args.raw_tokens, "Emit token id arrays only");
    sample_cmd->add_flag("--ascii-clean", sample_args.ascii, "Normalize quotes and dashes to ASCII");
    sample_cmd->add_flag("--raw-params", sample_args.raw_params, "Use raw instead of EMA weights");

    EvalArgs eval;
    eval.sampling.steps = 256;
    eval.sampling.num = 16;
    auto* eval_cmd = app.add_subcommand("eval", "Print Gen PPL, entropy and ELBO PPL as JSON");
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--data", eval.data, "Text corpus (judge training and held-out windows)")->required();
    eval_cmd->add_option("--samples", eval.samples_path, "Score samples from this NDJSON file instead of sampling");
    eval_cmd->add_option("--scorer-cmd", eval.scorer_cmd, "External scorer command")->expected(1, -1);
    eval_cmd->add_option("--ngram-order", eval.ngram_order, "Order of the n-gram judge")->check(CLI::Range(2, 5));
    eval_cmd->add_option("--mc-samples", eval.mc_samples, "Time samples per validation sequence")
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--max-sequences", eval.max_sequences, "Validation windows used, 0 for all")
        ->check(CLI::NonNegativeNumber);
    add_sampling_flags(eval_cmd, eval.sampling);

    std::uint64_t verify_seed = 0;
    auto* verify_cmd = app.add_subcommand("verify", "Run the diffusion core oracles");
    verify_cmd->add_option("--seed", verify_seed, "Random seed for the oracle instances");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train, out);
        if (sample_cmd->parsed()) return cmd_sample(sample_args, out);
        if (eval_cmd->parsed()) return cmd_eval(eval, out);
        if (verify_cmd->parsed()) return cmd_verify(verify_seed, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace udiff
