#pragma once

// Fixed vocabulary of the eleven-test battery: test names in file-column
// order, the five traits they aggregate into, and the demographic attributes.

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

#include "fts/error.hpp"

namespace fts {

inline constexpr std::size_t kTestCount = 11;
inline constexpr std::size_t kTraitCount = 5;
inline constexpr std::size_t kAttributeCount = 4;

enum class Trait : std::size_t {
  memory = 0,
  information_processing_speed = 1,
  reasoning = 2,
  attention = 3,
  behavioral_restraint = 4,
};

enum class Attribute : std::size_t {
  gender = 0,
  age_group = 1,
  education_level = 2,
  country = 3,
};

inline constexpr std::array<std::string_view, kTestCount> kTestNames = {
    "forward_memory_span",   "reverse_memory_span", "verbal_list_learning",
    "delayed_verbal_list_learning", "digit_symbol_coding", "trail_making_a",
    "trail_making_b",        "arithmetic_reasoning", "grammatical_reasoning",
    "divided_visual_attention", "go_no_go",
};

inline constexpr std::array<std::string_view, kTraitCount> kTraitNames = {
    "memory", "information_processing_speed", "reasoning", "attention",
    "behavioral_restraint",
};

inline constexpr std::array<std::string_view, kAttributeCount> kAttributeNames = {
    "gender", "age_group", "education_level", "country",
};

// Trait each test contributes to (4 memory, 3 speed, 2 reasoning, 1, 1).
inline constexpr std::array<Trait, kTestCount> kTestTrait = {
    Trait::memory,
    Trait::memory,
    Trait::memory,
    Trait::memory,
    Trait::information_processing_speed,
    Trait::information_processing_speed,
    Trait::information_processing_speed,
    Trait::reasoning,
    Trait::reasoning,
    Trait::attention,
    Trait::behavioral_restraint,
};

constexpr std::size_t index_of(Trait t) { return static_cast<std::size_t>(t); }
constexpr std::size_t index_of(Attribute a) { return static_cast<std::size_t>(a); }

inline constexpr std::array<Trait, kTraitCount> kAllTraits = {
    Trait::memory, Trait::information_processing_speed, Trait::reasoning,
    Trait::attention, Trait::behavioral_restraint,
};

inline constexpr std::array<Attribute, kAttributeCount> kAllAttributes = {
    Attribute::gender, Attribute::age_group, Attribute::education_level,
    Attribute::country,
};

inline std::string_view name_of(Trait t) { return kTraitNames[index_of(t)]; }
inline std::string_view name_of(Attribute a) { return kAttributeNames[index_of(a)]; }

inline std::optional<std::size_t> find_test(std::string_view name) {
  for (std::size_t i = 0; i < kTestCount; ++i)
    if (kTestNames[i] == name) return i;
  return std::nullopt;
}

inline std::optional<Trait> find_trait(std::string_view name) {
  for (std::size_t i = 0; i < kTraitCount; ++i)
    if (kTraitNames[i] == name) return static_cast<Trait>(i);
  return std::nullopt;
}

inline Attribute parse_attribute(std::string_view name) {
  for (std::size_t i = 0; i < kAttributeCount; ++i)
    if (kAttributeNames[i] == name) return static_cast<Attribute>(i);
  throw Error(ErrorCode::unknown_attribute, "unknown demographic attribute '" +
                                                std::string(name) + "'",
              std::string(name));
}

inline Trait parse_trait(std::string_view name) {
  if (auto t = find_trait(name)) return *t;
  throw Error(ErrorCode::invalid_spec, "unknown trait '" + std::string(name) + "'",
              std::string(name));
}

}  // namespace fts
