#include "core/error.hpp"
#include "mask_gen/mask_gen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace retouch::maskgen {

namespace {

enum class Axis { vertical, horizontal, centre };

struct Keyword {
    const char* word;
    LocationKind kind;
    Axis axis;
};

constexpr Keyword kLexicon[] = {
    {"left", LocationKind::left, Axis::horizontal},    {"leftmost", LocationKind::left, Axis::horizontal},
    {"right", LocationKind::right, Axis::horizontal},  {"rightmost", LocationKind::right, Axis::horizontal},
    {"top", LocationKind::top, Axis::vertical},        {"upper", LocationKind::top, Axis::vertical},
    {"bottom", LocationKind::bottom, Axis::vertical},  {"lower", LocationKind::bottom, Axis::vertical},
    {"center", LocationKind::center, Axis::centre},    {"middle", LocationKind::center, Axis::centre},
};

const Keyword* lookup(const std::string& token) {
    for (const auto& k : kLexicon) {
        if (token == k.word) {
            return &k;
        }
    }
    return nullptr;
}

LocationKind corner(LocationKind vertical, LocationKind horizontal) {
    if (vertical == LocationKind::top) {
        return horizontal == LocationKind::left ? LocationKind::top_left : LocationKind::top_right;
    }
    return horizontal == LocationKind::left ? LocationKind::bottom_left : LocationKind::bottom_right;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

} // namespace

const char* to_string(LocationKind kind) {
    switch (kind) {
    case LocationKind::none:
        return "none";
    case LocationKind::left:
        return "left";
    case LocationKind::right:
        return "right";
    case LocationKind::top:
        return "top";
    case LocationKind::bottom:
        return "bottom";
    case LocationKind::center:
        return "center";
    case LocationKind::top_left:
        return "top-left";
    case LocationKind::top_right:
        return "top-right";
    case LocationKind::bottom_left:
        return "bottom-left";
    case LocationKind::bottom_right:
        return "bottom-right";
    }
    return "none";
}

LocationConstraint LocationConstraint::of(LocationKind kind) {
    LocationConstraint c{kind, {}};
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) {
            bool allowed = false;
            switch (kind) {
            case LocationKind::none:
                allowed = true;
                break;
            case LocationKind::left:
                allowed = col == 0;
                break;
            case LocationKind::right:
                allowed = col == 2;
                break;
            case LocationKind::top:
                allowed = row == 0;
                break;
            case LocationKind::bottom:
                allowed = row == 2;
                break;
            case LocationKind::center:
                allowed = row == 1 && col == 1;
                break;
            case LocationKind::top_left:
                allowed = row == 0 && col == 0;
                break;
            case LocationKind::top_right:
                allowed = row == 0 && col == 2;
                break;
            case LocationKind::bottom_left:
                allowed = row == 2 && col == 0;
                break;
            case LocationKind::bottom_right:
                allowed = row == 2 && col == 2;
                break;
            }
            if (allowed) {
                c.allowed_cells.push_back({row, col});
            }
        }
    }
    return c;
}

bool LocationConstraint::allows(GridCell cell) const {
    return std::find(allowed_cells.begin(), allowed_cells.end(), cell) != allowed_cells.end();
}

LocationConstraint parse_location(const TextPrompt& query) {
    const auto tokens = tokenize(query.text());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Keyword* word = lookup(tokens[i]);
        if (!word) {
            continue;
        }
        if (i + 1 < tokens.size()) {
            if (const Keyword* next = lookup(tokens[i + 1])) {
                if (word->axis == Axis::vertical && next->axis == Axis::horizontal) {
                    return LocationConstraint::of(corner(word->kind, next->kind));
                }
                if (word->axis == Axis::horizontal && next->axis == Axis::vertical) {
                    return LocationConstraint::of(corner(next->kind, word->kind));
                }
            }
        }
        return LocationConstraint::of(word->kind);
    }
    return LocationConstraint::of(LocationKind::none);
}

GridCell location_cell(Point centroid, std::size_t width, std::size_t height) {
    auto band = [](double coord, std::size_t extent) {
        const double raw = std::floor(3.0 * coord / static_cast<double>(extent));
        return static_cast<int>(std::clamp(raw, 0.0, 2.0));
    };
    return {band(centroid.y, height), band(centroid.x, width)};
}

std::vector<std::size_t> location_refine(std::span<const ScoredEntity> entities, std::span<const std::size_t> selected,
                                         const LocationConstraint& constraint, std::size_t width,
                                         std::size_t height) {
    if (constraint.kind == LocationKind::none) {
        return {selected.begin(), selected.end()};
    }
    std::vector<std::size_t> kept;
    for (std::size_t position : selected) {
        if (position >= entities.size()) {
            fail(ErrorCode::invalid_argument, "selected position outside the entity list");
        }
        const GridCell cell = location_cell(mask_centroid(entities[position].mask), width, height);
        if (constraint.allows(cell)) {
            kept.push_back(position);
        }
    }
    return kept;
}

} // namespace retouch::maskgen
