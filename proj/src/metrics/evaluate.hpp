#pragma once

#include "backends/contracts.hpp"
#include "pipeline/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace retouch::metrics {

struct ManifestEntry {
    std::filesystem::path image_path;
    std::string query;
    std::string conditional_text;
    std::optional<std::filesystem::path> reference_path;
};

// JSON array of {image_path, query, conditional_text, reference_path?}.
// Relative paths resolve against the manifest's directory. An unreadable,
// malformed or empty manifest raises an io/format/invalid_argument error.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
std::vector<ManifestEntry> parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir);

// Which assessment terms drive selection.
enum class Variant { none, cma, iqa, cma_iqa };

const char* to_string(Variant variant);
// "all" or a comma list of none, cma, iqa, cma+iqa. Order is kept, duplicates dropped.
std::vector<Variant> parse_variants(const std::string& text);
std::vector<Variant> all_variants();

struct EvalConfig {
    pipeline::PipelineConfig pipeline;
    std::vector<Variant> variants = all_variants();
    unsigned jobs = 1; // entries evaluated concurrently
};

// Runs mask generation and retouching once per entry, scores every proposal
// with both terms once, then re-selects per variant. Metrics compare the
// selected output with the entry's original image; an entry whose query
// matches nothing contributes the unchanged original and is flagged
// no_match. Entries that fail are listed under "excluded" in every variant.
//
// {"reference": "original", "config": ..., "entries": n,
//  "variants": [{"variant", "enable_cma", "enable_iqa", "rows": [...],
//                "excluded": [...], "counts": {...}, "means": {...},
//                "fid": null, "lpips": null}]}
nlohmann::json evaluate(const std::vector<ManifestEntry>& entries, const backends::Backend& backend,
                        const EvalConfig& config);

// One line per (variant, row): variant,entry,image_path,no_match,chosen,ssim,psnr,mse
std::string report_csv(const nlohmann::json& report);

} // namespace retouch::metrics
