#include <CLI11.hpp>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>

#include "lesionforge/config.hpp"
#include "lesionforge/errors.hpp"
#include "lesionforge/log.hpp"
#include "lesionforge/pipeline.hpp"

namespace lf = lesionforge;

int main(int argc, char** argv) {
    CLI::App app{"lesionforge - phantom lesion synthesis and evaluation pipeline"};
    app.require_subcommand(1);

    std::string out_dir;
    std::string preset = "desk";
    std::optional<std::string> config_path;
    std::optional<uint64_t> seed;
    std::optional<int> workers;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_dir, "output directory")->required();
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--seed", seed, "master seed override");
        cmd->add_option("--workers", workers, "worker threads for per-image stages");
        cmd->add_option("--preset", preset, "smoke | desk | paper-finetune")
            ->check(CLI::IsMember({"smoke", "desk", "paper-finetune"}));
    };

    using Stage = std::function<void(const lf::RunConfig&, const std::filesystem::path&)>;
    struct Sub {
        const char* name;
        const char* help;
        Stage fn;
    };
    const std::vector<Sub> subs = {
        {"generate", "render the phantom dataset", lf::pipeline::stage_generate},
        {"segment", "grow lesion masks from box prompts", lf::pipeline::stage_segment},
        {"train-diffusion", "train the inpainting denoiser", lf::pipeline::stage_train_diffusion},
        {"synth", "inpaint synthetic lesions", lf::pipeline::stage_synth},
        {"metrics", "image-quality report for the synth set", lf::pipeline::stage_metrics},
        {"eval-cls", "oversampled k-fold classification experiment", lf::pipeline::stage_eval_cls},
        {"eval-det", "detection experiment with and without synthetics",
         lf::pipeline::stage_eval_det},
        {"figures", "side-by-side result panels", lf::pipeline::stage_figures},
        {"pipeline", "run every stage in order", lf::pipeline::run_pipeline},
    };

    std::vector<std::pair<CLI::App*, Stage>> wired;
    for (const Sub& sub : subs) {
        CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
        add_common(cmd);
        wired.emplace_back(cmd, sub.fn);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const lf::RunConfig cfg = lf::resolve_config(preset, config_path, seed, workers);
        for (const auto& [cmd, fn] : wired) {
            if (!cmd->parsed()) continue;
            const std::filesystem::path out(out_dir);
            lf::pipeline::write_config_echo(cfg, out);
            fn(cfg, out);
        }
    } catch (const lf::Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.category().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 2;
    }
    return 0;
}
