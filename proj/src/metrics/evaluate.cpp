#include "metrics/evaluate.hpp"

#include "core/error.hpp"
#include "core/image_io.hpp"
#include "core/parallel.hpp"
#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace retouch::metrics {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::string required_string(const json& entry, const char* key, std::size_t i) {
    const auto it = entry.find(key);
    if (it == entry.end() || !it->is_string() || it->get<std::string>().empty()) {
        fail(ErrorCode::format, "manifest entry " + std::to_string(i) + " needs a non-empty string " + key);
    }
    return it->get<std::string>();
}

assessment::AssessmentConfig variant_config(Variant v, double alpha) {
    assessment::AssessmentConfig c;
    c.alpha = alpha;
    c.enable_cma = v == Variant::cma || v == Variant::cma_iqa;
    c.enable_iqa = v == Variant::iqa || v == Variant::cma_iqa;
    return c;
}

struct Quality {
    double ssim = 1.0;
    double psnr = 0.0;
    double mse = 0.0;
};

Quality compare(const Image& reference, const Image& output) {
    Quality q;
    q.mse = mse(reference, output);
    q.psnr = psnr_from_mse(q.mse);
    q.ssim = ssim(reference, output);
    return q;
}

json quality_json(const Quality& q) {
    const bool infinite = std::isinf(q.psnr);
    return {{"ssim", q.ssim}, {"psnr", infinite ? json(nullptr) : json(q.psnr)}, {"psnr_infinite", infinite},
            {"mse", q.mse}};
}

struct EntryResult {
    std::string error;
    std::vector<json> rows; // one per variant
    std::vector<Quality> quality;
};

EntryResult evaluate_entry(std::size_t i, const ManifestEntry& entry, const backends::Backend& backend,
                           const EvalConfig& config) {
    EntryResult out;
    const Image original = read_image(entry.image_path);
    std::optional<Image> reference;
    if (entry.reference_path) {
        reference = read_image(*entry.reference_path);
    }
    const TextPrompt query(entry.query, PromptRole::query);
    const TextPrompt text(entry.conditional_text, PromptRole::conditional);

    // Both terms are scored once; each variant only re-runs the argmax.
    pipeline::PipelineConfig pc = config.pipeline;
    pc.assessment.enable_cma = true;
    pc.assessment.enable_iqa = true;
    const pipeline::PipelineResult result = pipeline::run(original, query, text, backend, pc);

    for (Variant v : config.variants) {
        json row = {{"entry", i},
                    {"image_path", entry.image_path.string()},
                    {"query", entry.query},
                    {"conditional_text", entry.conditional_text},
                    {"no_match", !result.matched()}};
        const Image* output = &original;
        if (result.matched()) {
            const auto selection = assessment::select(result.selection->scores,
                                                      variant_config(v, config.pipeline.assessment.alpha));
            json scores = json::array();
            for (const auto& s : selection.scores) {
                scores.push_back({{"index", s.proposal_index}, {"cma", s.cma}, {"iqa", s.iqa}, {"combined", s.combined}});
            }
            row["chosen"] = selection.chosen;
            row["proposals"] = std::move(scores);
            row["warnings"] = result.selection->warnings;
            output = &*result.retouch->proposals.at(selection.chosen).image;
        } else {
            row["chosen"] = nullptr;
            row["proposals"] = json::array();
            row["warnings"] = json::array();
        }
        const Quality q = compare(original, *output);
        row.update(quality_json(q));
        if (reference) {
            row["reference"] = quality_json(compare(*reference, *output));
        }
        out.rows.push_back(std::move(row));
        out.quality.push_back(q);
    }
    return out;
}

} // namespace

std::vector<ManifestEntry> parse_manifest(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_array()) {
        fail(ErrorCode::format, "manifest must be a JSON array");
    }
    if (doc.empty()) {
        fail(ErrorCode::invalid_argument, "manifest has no entries");
    }
    std::vector<ManifestEntry> entries;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& e = doc[i];
        if (!e.is_object()) {
            fail(ErrorCode::format, "manifest entry " + std::to_string(i) + " is not an object");
        }
        ManifestEntry entry;
        entry.image_path = resolve(base_dir, required_string(e, "image_path", i));
        entry.query = required_string(e, "query", i);
        entry.conditional_text = required_string(e, "conditional_text", i);
        if (e.contains("reference_path") && !e.at("reference_path").is_null()) {
            entry.reference_path = resolve(base_dir, required_string(e, "reference_path", i));
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    json doc = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (doc.is_discarded()) {
        fail(ErrorCode::format, "manifest " + path.string() + " is not valid JSON");
    }
    return parse_manifest(doc, path.parent_path());
}

const char* to_string(Variant variant) {
    switch (variant) {
    case Variant::none:
        return "none";
    case Variant::cma:
        return "cma";
    case Variant::iqa:
        return "iqa";
    case Variant::cma_iqa:
        return "cma+iqa";
    }
    return "unknown";
}

std::vector<Variant> all_variants() { return {Variant::none, Variant::cma, Variant::iqa, Variant::cma_iqa}; }

std::vector<Variant> parse_variants(const std::string& text) {
    if (text == "all") {
        return all_variants();
    }
    std::vector<Variant> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::optional<Variant> found;
        for (Variant v : all_variants()) {
            if (item == to_string(v)) {
                found = v;
            }
        }
        if (!found) {
            fail(ErrorCode::invalid_argument, "unknown variant '" + item + "'");
        }
        if (std::find(out.begin(), out.end(), *found) == out.end()) {
            out.push_back(*found);
        }
    }
    if (out.empty()) {
        fail(ErrorCode::invalid_argument, "no variants given");
    }
    return out;
}

json evaluate(const std::vector<ManifestEntry>& entries, const backends::Backend& backend,
              const EvalConfig& config) {
    if (entries.empty()) {
        fail(ErrorCode::invalid_argument, "manifest has no entries");
    }
    if (config.variants.empty()) {
        fail(ErrorCode::invalid_argument, "no variants given");
    }
    config.pipeline.validate();

    std::vector<EntryResult> results(entries.size());
    parallel_for(entries.size(), config.jobs, [&](std::size_t i) {
        try {
            results[i] = evaluate_entry(i, entries[i], backend, config);
        } catch (const std::exception& e) {
            results[i] = EntryResult{};
            results[i].error = e.what();
        }
    });

    json variants = json::array();
    for (std::size_t v = 0; v < config.variants.size(); ++v) {
        const auto vc = variant_config(config.variants[v], config.pipeline.assessment.alpha);
        json rows = json::array();
        json excluded = json::array();
        double ssim_sum = 0.0, mse_sum = 0.0, psnr_sum = 0.0;
        std::size_t finite = 0, infinite = 0, no_match = 0;
        for (std::size_t i = 0; i < results.size(); ++i) {
            if (!results[i].error.empty()) {
                excluded.push_back({{"entry", i}, {"image_path", entries[i].image_path.string()},
                                    {"error", results[i].error}});
                continue;
            }
            const Quality& q = results[i].quality[v];
            ssim_sum += q.ssim;
            mse_sum += q.mse;
            if (std::isinf(q.psnr)) {
                ++infinite;
            } else {
                psnr_sum += q.psnr;
                ++finite;
            }
            if (results[i].rows[v].at("no_match").get<bool>()) {
                ++no_match;
            }
            rows.push_back(results[i].rows[v]);
        }
        const std::size_t n = rows.size();
        json means = {{"ssim", n ? json(ssim_sum / n) : json(nullptr)},
                      {"mse", n ? json(mse_sum / n) : json(nullptr)},
                      {"psnr", finite ? json(psnr_sum / finite) : json(nullptr)},
                      {"psnr_finite_rows", finite},
                      {"psnr_infinite_rows", infinite}};
        variants.push_back({{"variant", to_string(config.variants[v])},
                            {"enable_cma", vc.enable_cma},
                            {"enable_iqa", vc.enable_iqa},
                            {"rows", std::move(rows)},
                            {"excluded", std::move(excluded)},
                            {"counts", {{"entries", entries.size()}, {"evaluated", n},
                                        {"excluded", entries.size() - n}, {"no_match", no_match}}},
                            {"means", std::move(means)},
                            {"fid", nullptr},
                            {"lpips", nullptr}});
    }
    return {{"reference", "original"},
            {"config", config.pipeline.to_json()},
            {"backend", backend.identity},
            {"entries", entries.size()},
            {"variants", std::move(variants)}};
}

std::string report_csv(const json& report) {
    auto cell = [](const json& v) -> std::string {
        if (v.is_null()) {
            return "";
        }
        if (v.is_string()) {
            std::string s = v.get<std::string>();
            if (s.find_first_of(",\"\n") == std::string::npos) {
                return s;
            }
            std::string quoted = "\"";
            for (char c : s) {
                quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
            }
            return quoted + "\"";
        }
        return v.dump();
    };
    std::string out = "variant,entry,image_path,no_match,chosen,ssim,psnr,psnr_infinite,mse\n";
    for (const auto& variant : report.at("variants")) {
        for (const auto& row : variant.at("rows")) {
            out += cell(variant.at("variant")) + "," + cell(row.at("entry")) + "," + cell(row.at("image_path")) +
                   "," + cell(row.at("no_match")) + "," + cell(row.at("chosen")) + "," + cell(row.at("ssim")) +
                   "," + cell(row.at("psnr")) + "," + cell(row.at("psnr_infinite")) + "," + cell(row.at("mse")) +
                   "\n";
        }
    }
    return out;
}

} // namespace retouch::metrics
