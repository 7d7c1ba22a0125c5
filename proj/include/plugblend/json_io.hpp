// Copyright 2026 The plugblend Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "plugblend/core.hpp"
#include "plugblend/decoder.hpp"
#include "plugblend/evaluation.hpp"
#include "plugblend/planner.hpp"
#include "plugblend/story.hpp"

namespace plugblend {

using Json = nlohmann::json;

Json to_json(const ControlConfig& config);
ControlConfig control_config_from_json(const Json& doc);

Json to_json(const SketchSet& set);
// `where` prefixes diagnostics (usually the file name).
SketchSet sketch_set_from_json(const Json& doc, const std::string& where = "sketch");
SketchSet load_sketch_set(const std::string& path);

Json to_json(const LinePlan& plan);
/// Per-line rows {"n", "<code>": weight...} from the plan's curves.
Json weight_table(const LinePlan& plan);

Json to_json(const GenerationParams& params);
GenerationParams generation_params_from_json(const Json& doc, GenerationParams defaults = {});

Json to_json(const PipelineParams& params);
PipelineParams pipeline_params_from_json(const Json& doc, PipelineParams defaults = {});

Json to_json(const StoryLine& line);
StoryLine story_line_from_json(const Json& doc);
Json to_json(const Story& story);
Story story_from_json(const Json& doc);

Json to_json(const SweepResult& sweep);
Json to_json(const HeatmapCell& cell);
Json to_json(const PerplexityRow& row);

/// Finite doubles only; non-finite values become null.
Json number_or_null(double value);

}  // namespace plugblend
