// Command-line front end over the C interface.
#include "retouch/retouch.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kNoMatch = 3,
    kBackend = 4,
    kRetouch = 5,
    kAssess = 6,
};

struct Failure {
    int exit_code;
    std::string message;
};

int input_or_backend(retouch_status s) {
    switch (s) {
    case RETOUCH_E_BACKEND:
    case RETOUCH_E_TRANSPORT:
    case RETOUCH_E_FRAMING:
        return kBackend;
    case RETOUCH_E_INTERNAL:
        return kFailure;
    default:
        return kUsage;
    }
}

void check(retouch_status s, int exit_code) {
    if (s != RETOUCH_OK) {
        throw Failure{exit_code, std::string(retouch_status_string(s)) + ": " + retouch_last_error()};
    }
}

void check(retouch_status s) { check(s, input_or_backend(s)); }

struct Deleter {
    void operator()(retouch_image* p) const { retouch_image_free(p); }
    void operator()(retouch_mask* p) const { retouch_mask_free(p); }
    void operator()(retouch_backend* p) const { retouch_backend_free(p); }
    void operator()(retouch_run* p) const { retouch_run_free(p); }
    void operator()(char* p) const { retouch_string_free(p); }
};

template <typename T>
using Owned = std::unique_ptr<T, Deleter>;

Owned<retouch_image> load_image(const std::string& path) {
    retouch_image* raw = nullptr;
    check(retouch_image_read(path.c_str(), &raw), kUsage);
    return Owned<retouch_image>(raw);
}

Owned<retouch_backend> open_backend(const std::optional<std::string>& descriptor) {
    retouch_backend* raw = nullptr;
    const retouch_status s = retouch_backend_open(descriptor ? descriptor->c_str() : nullptr, &raw);
    check(s, s == RETOUCH_E_INVALID_ARGUMENT ? kUsage : kBackend);
    return Owned<retouch_backend>(raw);
}

json take_json(char* raw) {
    Owned<char> owned(raw);
    return json::parse(owned.get());
}

json backend_identity(const retouch_backend* backend) {
    char* raw = nullptr;
    check(retouch_backend_identity(backend, &raw));
    return take_json(raw);
}

void write_text(const fs::path& path, const std::string& text) {
    check(retouch_write_text_atomic(path.string().c_str(), text.c_str()), kFailure);
}

// Shared knobs for run and eval. Flags given on the command line win over
// --config, which wins over the defaults.
struct RunFlags {
    std::string config_path;
    std::size_t m = 4;
    std::size_t steps = 200;
    double eta = 1.0;
    double alpha = 5.0;
    std::uint64_t seed = 0;
    double floor = 0.2;
    std::optional<double> fixed_tau;
    bool no_cma = false;
    bool no_iqa = false;
    unsigned jobs = 1;
    std::vector<std::uint64_t> seeds;

    CLI::Option* m_opt = nullptr;
    CLI::Option* steps_opt = nullptr;
    CLI::Option* eta_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* seed_opt = nullptr;

    void add_to(CLI::App& app) {
        app.add_option("--config", config_path, "JSON file with m, T, eta, beta_start, beta_end, seeds, alpha")
            ->check(CLI::ExistingFile);
        m_opt = app.add_option("--m", m, "proposals per image")->check(CLI::PositiveNumber);
        steps_opt = app.add_option("--T", steps, "diffusion timesteps")->check(CLI::PositiveNumber);
        eta_opt = app.add_option("--eta", eta, "sampling stochasticity in [0,1]")->check(CLI::Range(0.0, 1.0));
        alpha_opt = app.add_option("--alpha", alpha, "weight of the background-change penalty")
                        ->check(CLI::NonNegativeNumber);
        seed_opt = app.add_option("--seed", seed, "base seed; proposal k uses seed+k");
        app.add_option("--floor", floor, "minimum entity score")->check(CLI::Range(-1.0, 1.0));
        app.add_option("--fixed-tau", fixed_tau, "use a fixed score threshold instead of the adaptive one");
        app.add_flag("--no-cma", no_cma, "drop the text-alignment term");
        app.add_flag("--no-iqa", no_iqa, "drop the background-change term");
        app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    }

    retouch_run_options resolve() {
        retouch_run_options o;
        retouch_run_options_init(&o);
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            json cfg = json::parse(in, nullptr, false);
            if (cfg.is_discarded() || !cfg.is_object()) {
                throw Failure{kUsage, "config " + config_path + " is not a JSON object"};
            }
            try {
                o.proposals = cfg.value("m", o.proposals);
                o.steps = cfg.value("T", o.steps);
                o.eta = cfg.value("eta", o.eta);
                o.beta_start = cfg.value("beta_start", o.beta_start);
                o.beta_end = cfg.value("beta_end", o.beta_end);
                o.alpha = cfg.value("alpha", o.alpha);
                if (cfg.contains("seeds")) {
                    seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
                }
            } catch (const json::exception& e) {
                throw Failure{kUsage, "config " + config_path + ": " + e.what()};
            }
        }
        if (m_opt->count()) {
            o.proposals = m;
        }
        if (steps_opt->count()) {
            o.steps = steps;
        }
        if (eta_opt->count()) {
            o.eta = eta;
        }
        if (alpha_opt->count()) {
            o.alpha = alpha;
        }
        if (seed_opt->count()) {
            o.base_seed = seed;
            seeds.clear();
        }
        if (!seeds.empty()) {
            if (m_opt->count() && seeds.size() != o.proposals) {
                throw Failure{kUsage, "--m disagrees with the number of seeds in the config"};
            }
            o.proposals = seeds.size();
            o.seeds = seeds.data();
        }
        o.mask.floor = floor;
        if (fixed_tau) {
            o.mask.use_fixed_tau = 1;
            o.mask.fixed_tau = *fixed_tau;
        }
        o.enable_cma = no_cma ? 0 : 1;
        o.enable_iqa = no_iqa ? 0 : 1;
        o.jobs = jobs;
        return o;
    }
};

struct MaskCommand {
    std::string image, query, out, report;
    std::optional<std::string> backend;
    double floor = 0.2;
    std::optional<double> fixed_tau;
    bool crop = false;
    unsigned jobs = 1;

    int operator()() const {
        auto img = load_image(image);
        auto b = open_backend(backend);
        retouch_mask_options o;
        retouch_mask_options_init(&o);
        o.floor = floor;
        if (fixed_tau) {
            o.use_fixed_tau = 1;
            o.fixed_tau = *fixed_tau;
        }
        o.crop_to_bbox = crop ? 1 : 0;
        o.jobs = jobs;
        retouch_mask* raw_mask = nullptr;
        char* raw_report = nullptr;
        check(retouch_generate_mask(b.get(), img.get(), query.c_str(), &o, &raw_mask, &raw_report));
        Owned<retouch_mask> mask(raw_mask);
        json doc = take_json(raw_report);
        doc["backend"] = backend_identity(b.get());
        doc["image"] = image;
        doc["mask_path"] = mask ? json(out) : json(nullptr);
        if (mask) {
            check(retouch_mask_write(mask.get(), out.c_str()), kFailure);
        }
        if (!report.empty()) {
            write_text(report, doc.dump(2) + "\n");
        } else {
            std::cout << doc.dump(2) << "\n";
        }
        if (!mask) {
            std::cerr << "retouch: no entity matches \"" << query << "\"; no mask written\n";
            return kNoMatch;
        }
        return kOk;
    }
};

struct RunCommand {
    std::string image, query, text, out_dir;
    std::optional<std::string> backend;
    RunFlags flags;

    int operator()() {
        retouch_run_options o = flags.resolve();
        auto img = load_image(image);
        auto b = open_backend(backend);
        retouch_run* raw = nullptr;
        const retouch_status s = retouch_run_pipeline(b.get(), img.get(), query.c_str(), text.c_str(), &o, &raw);
        if (s != RETOUCH_OK) {
            const retouch_stage stage = retouch_last_error_stage();
            int code = input_or_backend(s);
            if (stage == RETOUCH_STAGE_RETOUCH) {
                code = kRetouch;
            } else if (stage == RETOUCH_STAGE_ASSESS) {
                code = kAssess;
            }
            check(s, code);
        }
        Owned<retouch_run> run(raw);
        char* raw_report = nullptr;
        check(retouch_run_report(run.get(), &raw_report));
        json doc = take_json(raw_report);
        doc["backend"] = backend_identity(b.get());
        doc["inputs"] = {{"image", image}, {"query", query}, {"text", text}};

        const fs::path dir(out_dir);
        std::error_code ec;
        fs::create_directories(dir / "proposals", ec);
        if (ec) {
            throw Failure{kFailure, "cannot create " + (dir / "proposals").string() + ": " + ec.message()};
        }
        json artifacts = json::array();
        if (!retouch_run_matched(run.get())) {
            artifacts.push_back("report.json");
            doc["artifacts"] = artifacts;
            write_text(dir / "report.json", doc.dump(2) + "\n");
            std::cerr << "retouch: no entity matches \"" << query << "\"; nothing retouched\n";
            return kNoMatch;
        }
        check(retouch_mask_write(retouch_run_mask(run.get()), (dir / "mask.png").string().c_str()), kFailure);
        artifacts.push_back("mask.png");
        for (std::size_t k = 0; k < retouch_run_proposal_count(run.get()); ++k) {
            const retouch_image* p = retouch_run_proposal(run.get(), k);
            if (p == nullptr) {
                continue;
            }
            const std::string rel = "proposals/proposal_" + std::to_string(k) + ".png";
            check(retouch_image_write(p, (dir / rel).string().c_str()), kFailure);
            artifacts.push_back(rel);
        }
        std::size_t chosen = 0;
        check(retouch_run_selected(run.get(), &chosen));
        check(retouch_image_write(retouch_run_proposal(run.get(), chosen), (dir / "selected.png").string().c_str()),
              kFailure);
        artifacts.push_back("selected.png");
        artifacts.push_back("report.json");
        doc["artifacts"] = artifacts;
        write_text(dir / "report.json", doc.dump(2) + "\n");
        std::cout << "selected proposal " << chosen << " -> " << (dir / "selected.png").string() << "\n";
        return kOk;
    }
};

struct AssessCommand {
    std::string original, proposals_dir, text, out;
    std::optional<std::string> backend;
    double alpha = 5.0;
    bool no_cma = false;
    bool no_iqa = false;
    unsigned jobs = 1;

    int operator()() const {
        auto orig = load_image(original);
        std::vector<fs::path> files;
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(proposals_dir, ec)) {
            const auto ext = entry.path().extension().string();
            if (entry.is_regular_file() && (ext == ".png" || ext == ".ppm")) {
                files.push_back(entry.path());
            }
        }
        if (ec) {
            throw Failure{kUsage, "cannot list " + proposals_dir + ": " + ec.message()};
        }
        if (files.empty()) {
            throw Failure{kUsage, "no .png or .ppm proposals in " + proposals_dir};
        }
        std::sort(files.begin(), files.end());
        std::vector<Owned<retouch_image>> images;
        std::vector<const retouch_image*> views;
        for (const auto& f : files) {
            images.push_back(load_image(f.string()));
            views.push_back(images.back().get());
        }
        auto b = open_backend(backend);
        retouch_assess_options o;
        retouch_assess_options_init(&o);
        o.alpha = alpha;
        o.enable_cma = no_cma ? 0 : 1;
        o.enable_iqa = no_iqa ? 0 : 1;
        o.jobs = jobs;
        std::size_t chosen = 0;
        char* raw = nullptr;
        const retouch_status s =
            retouch_assess(b.get(), orig.get(), views.data(), views.size(), text.c_str(), &o, &chosen, &raw);
        check(s, s == RETOUCH_E_INVALID_ARGUMENT || s == RETOUCH_E_SHAPE ? kUsage : kAssess);
        json doc = take_json(raw);
        doc["backend"] = backend_identity(b.get());
        json names = json::array();
        for (const auto& f : files) {
            names.push_back(f.filename().string());
        }
        doc["proposals"] = names;
        doc["chosen_file"] = names[chosen];
        if (!out.empty()) {
            write_text(out, doc.dump(2) + "\n");
        } else {
            std::cout << doc.dump(2) << "\n";
        }
        return kOk;
    }
};

struct EvalCommand {
    std::string manifest, variants = "all", out, csv;
    std::optional<std::string> backend;
    RunFlags flags;

    int operator()() {
        retouch_eval_options o;
        retouch_eval_options_init(&o);
        o.run = flags.resolve();
        o.variants = variants.c_str();
        o.jobs = flags.jobs;
        auto b = open_backend(backend);
        char* raw = nullptr;
        check(retouch_evaluate_manifest(b.get(), manifest.c_str(), &o, &raw));
        Owned<char> report(raw);
        if (!out.empty()) {
            write_text(out, std::string(report.get()) + "\n");
        } else {
            std::cout << report.get() << "\n";
        }
        if (!csv.empty()) {
            char* raw_csv = nullptr;
            check(retouch_eval_report_csv(report.get(), &raw_csv));
            Owned<char> table(raw_csv);
            write_text(csv, table.get());
        }
        return kOk;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text-guided local image retouching"};
    app.require_subcommand(1);
    app.set_version_flag("--version", retouch_version());

    MaskCommand mask;
    auto* mask_cmd = app.add_subcommand("mask", "find the region a query refers to and write it as a mask");
    mask_cmd->add_option("--image", mask.image, "input image (png or ppm)")->required();
    mask_cmd->add_option("--query", mask.query, "what to select, e.g. \"the cup on the left\"")->required();
    mask_cmd->add_option("--out", mask.out, "mask output (png or pgm)")->required();
    mask_cmd->add_option("--report", mask.report, "write the JSON report here instead of stdout");
    mask_cmd->add_option("--backend", mask.backend, "backend descriptor (default $RETOUCH_BACKEND, then mock)");
    mask_cmd->add_option("--floor", mask.floor, "minimum entity score")->check(CLI::Range(-1.0, 1.0));
    mask_cmd->add_option("--fixed-tau", mask.fixed_tau, "fixed score threshold");
    mask_cmd->add_flag("--crop", mask.crop, "score entities on their bounding-box crop");
    mask_cmd->add_option("--jobs", mask.jobs, "worker threads")->check(CLI::PositiveNumber);

    RunCommand run;
    auto* run_cmd = app.add_subcommand("run", "mask, retouch and pick the best proposal");
    run_cmd->add_option("--image", run.image, "input image (png or ppm)")->required();
    run_cmd->add_option("--query", run.query, "region to edit")->required();
    run_cmd->add_option("--text", run.text, "what the region should become")->required();
    run_cmd->add_option("--out-dir", run.out_dir, "directory for the artifacts")->required();
    run_cmd->add_option("--backend", run.backend, "backend descriptor (default $RETOUCH_BACKEND, then mock)");
    run.flags.add_to(*run_cmd);

    AssessCommand assess;
    auto* assess_cmd = app.add_subcommand("assess", "rank existing proposals against the original");
    assess_cmd->add_option("--original", assess.original, "unedited image")->required();
    assess_cmd->add_option("--proposals", assess.proposals_dir, "directory of png/ppm proposals")->required();
    assess_cmd->add_option("--text", assess.text, "target description")->required();
    assess_cmd->add_option("--out", assess.out, "write the JSON report here instead of stdout");
    assess_cmd->add_option("--backend", assess.backend, "backend descriptor (default $RETOUCH_BACKEND, then mock)");
    assess_cmd->add_option("--alpha", assess.alpha, "weight of the background-change penalty")
        ->check(CLI::NonNegativeNumber);
    assess_cmd->add_flag("--no-cma", assess.no_cma, "drop the text-alignment term");
    assess_cmd->add_flag("--no-iqa", assess.no_iqa, "drop the background-change term");
    assess_cmd->add_option("--jobs", assess.jobs, "worker threads")->check(CLI::PositiveNumber);

    EvalCommand eval;
    auto* eval_cmd = app.add_subcommand("eval", "run a manifest under several assessment variants");
    eval_cmd->add_option("--manifest", eval.manifest, "JSON array of entries")->required();
    eval_cmd->add_option("--variants", eval.variants, "all, or a comma list of none,cma,iqa,cma+iqa");
    eval_cmd->add_option("--out", eval.out, "write the JSON report here instead of stdout");
    eval_cmd->add_option("--csv", eval.csv, "also write per-row metrics as CSV");
    eval_cmd->add_option("--backend", eval.backend, "backend descriptor (default $RETOUCH_BACKEND, then mock)");
    eval.flags.add_to(*eval_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*mask_cmd) {
            return mask();
        }
        if (*run_cmd) {
            return run();
        }
        if (*assess_cmd) {
            return assess();
        }
        return eval();
    } catch (const Failure& f) {
        std::cerr << "retouch: error: " << f.message << "\n";
        return f.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "retouch: error: " << e.what() << "\n";
        return kFailure;
    }
}
