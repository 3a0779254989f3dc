#include "udiff/data.hpp"

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string_view>

namespace udiff {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view section) {
    if (!j.is_object()) throw std::invalid_argument(std::string(section) + " must be a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (auto key : allowed) known = known || item.key() == key;
        if (!known) throw std::invalid_argument("unknown key '" + item.key() + "' in " + std::string(section));
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

}  // namespace

void to_json(json& j, const ModelConfig& c) {
    j = json{{"vocab_size", c.vocab_size},         {"context_length", c.context_length},
             {"layers", c.layers},                 {"hidden_dim", c.hidden_dim},
             {"heads", c.heads},                   {"time_embed_dim", c.time_embed_dim},
             {"time_frequency_dim", c.time_frequency_dim}, {"mlp_ratio", c.mlp_ratio},
             {"dropout", c.dropout}};
}

void from_json(const json& j, ModelConfig& c) {
    check_keys(j,
               {"vocab_size", "context_length", "layers", "hidden_dim", "heads", "time_embed_dim",
                "time_frequency_dim", "mlp_ratio", "dropout"},
               "model");
    read(j, "vocab_size", c.vocab_size);
    read(j, "context_length", c.context_length);
    read(j, "layers", c.layers);
    read(j, "hidden_dim", c.hidden_dim);
    read(j, "heads", c.heads);
    read(j, "time_embed_dim", c.time_embed_dim);
    read(j, "time_frequency_dim", c.time_frequency_dim);
    read(j, "mlp_ratio", c.mlp_ratio);
    read(j, "dropout", c.dropout);
}

void to_json(json& j, const LossConfig& c) {
    j = json{{"variant", to_string(c.variant)},
             {"epsilon", c.epsilon},
             {"time_samples_per_example", c.time_samples_per_example},
             {"reduction", to_string(c.reduction)},
             {"epsilon_positive_only", c.epsilon_positive_only},
             {"exclude_target_negative", c.exclude_target_negative},
             {"negative_coefficient", c.negative_coefficient}};
}

void from_json(const json& j, LossConfig& c) {
    check_keys(j,
               {"variant", "epsilon", "time_samples_per_example", "reduction", "epsilon_positive_only",
                "exclude_target_negative", "negative_coefficient"},
               "loss");
    if (j.contains("variant")) c.variant = parse_loss_variant(j.at("variant").get<std::string>());
    if (j.contains("reduction")) c.reduction = parse_reduction(j.at("reduction").get<std::string>());
    read(j, "epsilon", c.epsilon);
    read(j, "time_samples_per_example", c.time_samples_per_example);
    read(j, "epsilon_positive_only", c.epsilon_positive_only);
    read(j, "exclude_target_negative", c.exclude_target_negative);
    read(j, "negative_coefficient", c.negative_coefficient);
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"lr", c.lr},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"adam_eps", c.adam_eps},
             {"weight_decay", c.weight_decay},
             {"warmup_steps", c.warmup_steps},
             {"schedule", to_string(c.schedule)},
             {"batch_size", c.batch_size},
             {"total_steps", c.total_steps},
             {"ema_decay", c.ema_decay},
             {"loss", c.loss},
             {"seed", c.seed},
             {"eval_every", c.eval_every},
             {"checkpoint_every", c.checkpoint_every},
             {"grad_clip", c.grad_clip},
             {"t_min", c.t_min},
             {"noise_schedule", to_string(c.noise_schedule)},
             {"noise_clamp", c.noise_clamp},
             {"val_sequences", c.val_sequences},
             {"elbo_mc_samples", c.elbo_mc_samples},
             {"max_nonfinite_steps", c.max_nonfinite_steps}};
}

void from_json(const json& j, TrainConfig& c) {
    check_keys(j,
               {"lr", "beta1", "beta2", "adam_eps", "weight_decay", "warmup_steps", "schedule", "batch_size",
                "total_steps", "ema_decay", "loss", "seed", "eval_every", "checkpoint_every", "grad_clip", "t_min",
                "noise_schedule", "noise_clamp", "val_sequences", "elbo_mc_samples", "max_nonfinite_steps"},
               "train");
    read(j, "lr", c.lr);
    read(j, "beta1", c.beta1);
    read(j, "beta2", c.beta2);
    read(j, "adam_eps", c.adam_eps);
    read(j, "weight_decay", c.weight_decay);
    read(j, "warmup_steps", c.warmup_steps);
    if (j.contains("schedule")) c.schedule = parse_lr_schedule(j.at("schedule").get<std::string>());
    read(j, "batch_size", c.batch_size);
    read(j, "total_steps", c.total_steps);
    read(j, "ema_decay", c.ema_decay);
    read(j, "loss", c.loss);
    read(j, "seed", c.seed);
    read(j, "eval_every", c.eval_every);
    read(j, "checkpoint_every", c.checkpoint_every);
    read(j, "grad_clip", c.grad_clip);
    read(j, "t_min", c.t_min);
    if (j.contains("noise_schedule")) c.noise_schedule = parse_schedule_kind(j.at("noise_schedule").get<std::string>());
    read(j, "noise_clamp", c.noise_clamp);
    read(j, "val_sequences", c.val_sequences);
    read(j, "elbo_mc_samples", c.elbo_mc_samples);
    read(j, "max_nonfinite_steps", c.max_nonfinite_steps);
}

void to_json(json& j, const SampleConfig& c) {
    j = json{{"num_steps", c.num_steps},
             {"num_samples", c.num_samples},
             {"context_length", c.context_length},
             {"temperature", c.temperature},
             {"seed", c.seed},
             {"final_decode", to_string(c.final_decode)}};
}

void from_json(const json& j, SampleConfig& c) {
    check_keys(j, {"num_steps", "num_samples", "context_length", "temperature", "seed", "final_decode"}, "sample");
    read(j, "num_steps", c.num_steps);
    read(j, "num_samples", c.num_samples);
    read(j, "context_length", c.context_length);
    read(j, "temperature", c.temperature);
    read(j, "seed", c.seed);
    if (j.contains("final_decode")) c.final_decode = parse_final_decode(j.at("final_decode").get<std::string>());
}

void to_json(json& j, const RunConfig& c) {
    j = json{{"data_path", c.data_path.string()},
             {"output_dir", c.output_dir.string()},
             {"seed", c.seed},
             {"stride", c.stride},
             {"model", c.model},
             {"train", c.train},
             {"sample", c.sample}};
}

void from_json(const json& j, RunConfig& c) {
    check_keys(j, {"data_path", "output_dir", "seed", "stride", "model", "train", "sample"}, "run config");
    if (j.contains("data_path")) c.data_path = j.at("data_path").get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    read(j, "seed", c.seed);
    read(j, "stride", c.stride);
    read(j, "model", c.model);
    read(j, "train", c.train);
    read(j, "sample", c.sample);
}

void RunConfig::validate() const {
    if (data_path.empty()) throw std::invalid_argument("data_path is required");
    if (!std::filesystem::exists(data_path))
        throw std::invalid_argument("data_path does not exist: " + data_path.string());
    if (output_dir.empty()) throw std::invalid_argument("output_dir is required");
    if (stride < 0) throw std::invalid_argument("stride must be non-negative");
    if (model.context_length < 1) throw std::invalid_argument("context_length must be positive");
    train.validate();
    sample.validate();
}

RunConfig parse_run_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        return j.get<RunConfig>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config has a wrong type: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    auto config = parse_run_config(read_text_file(path));
    const auto base = path.parent_path();
    if (config.data_path.is_relative()) config.data_path = base / config.data_path;
    if (config.output_dir.is_relative()) config.output_dir = base / config.output_dir;
    return config;
}

std::string serialize_run_config(const RunConfig& config) { return json(config).dump(2); }

}  // namespace udiff
