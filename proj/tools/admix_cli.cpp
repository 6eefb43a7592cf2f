#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "admix/dataset.hpp"
#include "admix/harness.hpp"
#include "admix/model.hpp"
#include "admix/train.hpp"

namespace {

void add_attack_flags(CLI::App* cmd, admix::RunConfig& run, float& eps255,
                      std::vector<float>& gamma) {
    cmd->add_option("--surrogate", run.surrogate_paths, "surrogate checkpoint (repeatable; >1 forms an equal-weight ensemble)")
        ->required();
    cmd->add_option("--target", run.target_paths, "target checkpoint (repeatable)");
    cmd->add_option("--data", run.dataset_path, "dataset file")->required();
    cmd->add_option("--attack", run.attack_name,
                    "one of fgsm,ifgsm,mifgsm,dim,tim,sim,admix,mixup,mixup-wlm,admix-lm,cutmix");
    cmd->add_flag("--use-dim", run.attack.use_dim, "compose with diverse-input resizing");
    cmd->add_flag("--use-tim", run.attack.use_tim, "compose with gradient kernel smoothing");
    cmd->add_option("--eps-255", eps255, "L-inf budget in 0-255 pixel units");
    cmd->add_option("--iters", run.attack.iters, "iteration count T");
    cmd->add_option("--alpha-255", run.attack.alpha, "step size in 0-255 units (default eps/T)");
    cmd->add_option("--mu", run.attack.mu, "momentum decay");
    cmd->add_option("--m1", run.attack.tcfg.m1, "scaled copies per sampled image");
    cmd->add_option("--m2", run.attack.tcfg.m2, "sampled images per iteration");
    cmd->add_option("--eta", run.attack.tcfg.eta, "admix strength");
    cmd->add_option("--gamma", gamma, "explicit gamma schedule (default 1/2^i)");
    cmd->add_option("--dim-prob", run.attack.tcfg.dim_prob, "diverse-input probability p");
    cmd->add_option("--dim-max-ratio", run.attack.tcfg.dim_max_ratio, "padded-size ratio");
    cmd->add_option("--tim-kernel", run.attack.tcfg.tim_kernel_size, "smoothing kernel size (odd)");
    cmd->add_option("--tim-sigma-span", run.attack.tcfg.tim_sigma_span,
                    "stddev span of the kernel");
    cmd->add_option("--seed", run.attack.seed, "global seed");
    cmd->add_option("--count", run.image_count, "evaluate only the first N records");
    cmd->add_flag("--restrict-to-correct", run.restrict_to_correct,
                  "exclude images a target already misclassifies cleanly");
}

void finish_run_config(admix::RunConfig& run, float eps255, const std::vector<float>& gamma) {
    run.attack.epsilon = eps255 / 255.0f;
    if (run.attack.alpha > 0.0f) run.attack.alpha /= 255.0f;
    run.attack.tcfg.gamma = gamma;
    if (run.target_paths.empty()) run.target_paths = run.surrogate_paths;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Input-transformation transfer attack toolkit"};
    app.require_subcommand(1);

    // gen-data
    int classes = 10, per_class = 120, size = 32;
    uint64_t gen_seed = 0;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic shape dataset");
    gen->add_option("--classes", classes);
    gen->add_option("--per-class", per_class);
    gen->add_option("--size", size);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--out", gen_out)->required();

    // train
    std::string arch = "net-a", train_data, train_out;
    admix::TrainOptions topt;
    size_t train_count = 0;
    auto* tr = app.add_subcommand("train", "train a reference net and save a checkpoint");
    tr->add_option("--arch", arch, "net-a or net-b");
    tr->add_option("--data", train_data)->required();
    tr->add_option("--epochs", topt.epochs);
    tr->add_option("--lr", topt.lr);
    tr->add_option("--batch", topt.batch);
    tr->add_option("--seed", topt.seed);
    tr->add_option("--train-count", train_count, "train on the first N records (rest is held out)");
    tr->add_option("--out", train_out)->required();

    // attack
    admix::RunConfig run;
    float eps255 = 16.0f;
    std::vector<float> gamma;
    std::string out_path, format = "csv";
    auto* atk = app.add_subcommand("attack", "craft adversaries and report success rates");
    add_attack_flags(atk, run, eps255, gamma);
    atk->add_option("--out", out_path)->required();
    atk->add_option("--format", format, "csv or json");

    // sweep
    admix::RunConfig sweep_run;
    float sweep_eps255 = 16.0f;
    std::vector<float> sweep_gamma;
    std::string sweep_axis, sweep_out, sweep_format = "csv";
    std::vector<float> sweep_values;
    auto* sw = app.add_subcommand("sweep", "ablation sweep over m2 or eta");
    add_attack_flags(sw, sweep_run, sweep_eps255, sweep_gamma);
    sw->add_option("--axis", sweep_axis, "m2 or eta")->required();
    sw->add_option("--values", sweep_values, "axis values")->required();
    sw->add_option("--out", sweep_out)->required();
    sw->add_option("--format", sweep_format, "csv or json");

    // report
    std::string rep_in, rep_in_format = "json", rep_out, rep_out_format = "csv";
    auto* rep = app.add_subcommand("report", "re-emit a report in another format");
    rep->add_option("--in", rep_in)->required();
    rep->add_option("--in-format", rep_in_format, "csv or json");
    rep->add_option("--out", rep_out)->required();
    rep->add_option("--format", rep_out_format, "csv or json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            admix::Dataset ds = admix::generate_synthetic_dataset(classes, per_class, size, gen_seed);
            admix::save_dataset(ds, gen_out);
            std::printf("wrote %zu records (%d classes, %dx%d) to %s\n", ds.size(), classes, size,
                        size, gen_out.c_str());
        } else if (tr->parsed()) {
            admix::Dataset ds = admix::load_dataset(train_data);
            admix::Model model;
            model.spec = admix::ModelSpec::builtin(arch);
            model.weights = admix::init_weights(model.spec, topt.seed);
            size_t count = train_count > 0 ? train_count : ds.size();
            admix::train(model, ds, topt, 0, count);
            float train_acc = admix::accuracy(model, ds, 0, count);
            std::printf("train accuracy: %.4f\n", static_cast<double>(train_acc));
            if (count < ds.size()) {
                float held = admix::accuracy(model, ds, count);
                std::printf("held-out accuracy: %.4f\n", static_cast<double>(held));
            }
            admix::save_checkpoint(model, train_out);
            std::printf("saved %s checkpoint to %s\n", arch.c_str(), train_out.c_str());
        } else if (atk->parsed()) {
            finish_run_config(run, eps255, gamma);
            admix::EvalResult res = admix::evaluate_attack(run);
            admix::write_report(res.rows, format, out_path);
            std::printf("attacked %zu images; max L-inf %.6f; wrote %s\n", res.n_images,
                        static_cast<double>(res.max_linf), out_path.c_str());
        } else if (sw->parsed()) {
            finish_run_config(sweep_run, sweep_eps255, sweep_gamma);
            admix::SweepAxis axis;
            if (sweep_axis == "m2")
                axis = admix::SweepAxis::M2;
            else if (sweep_axis == "eta")
                axis = admix::SweepAxis::Eta;
            else
                throw admix::TensorError("axis must be m2 or eta");
            auto rows = admix::sweep_ablation(sweep_run, axis, sweep_values);
            admix::write_report(rows, sweep_format, sweep_out);
            std::printf("wrote %zu sweep rows to %s\n", rows.size(), sweep_out.c_str());
        } else if (rep->parsed()) {
            auto rows = admix::read_report(rep_in_format, rep_in);
            admix::write_report(rows, rep_out_format, rep_out);
            std::printf("rewrote %zu rows to %s\n", rows.size(), rep_out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
