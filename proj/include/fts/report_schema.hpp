#pragma once

// Published JSON Schema of the simulation result document. Kept byte-equal to
// docs/report_schema.json (checked by the test suite).

#include <string_view>

namespace fts {

inline constexpr std::string_view kReportSchema = R"schema({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "$id": "fts.simulation_result/1",
  "title": "Simulation result",
  "type": "object",
  "required": ["schema", "schema_version", "config", "report", "datasets", "models", "warnings"],
  "properties": {
    "schema": {"const": "fts.simulation_result"},
    "schema_version": {"const": 1},
    "config": {"$ref": "#/$defs/config"},
    "report": {"$ref": "#/$defs/report"},
    "datasets": {
      "type": "object",
      "required": ["A", "B"],
      "properties": {"A": {"$ref": "#/$defs/dataset"}, "B": {"$ref": "#/$defs/dataset"}}
    },
    "models": {
      "type": "object",
      "required": ["A", "B"],
      "properties": {"A": {"$ref": "#/$defs/model"}, "B": {"$ref": "#/$defs/model"}}
    },
    "warnings": {"type": "array", "items": {"type": "string"}}
  },
  "$defs": {
    "rate": {
      "description": "A proportion; null is the undefined marker for a 0/0 rate and is displayed as n/a.",
      "oneOf": [{"type": "number", "minimum": 0, "maximum": 1}, {"type": "null"}]
    },
    "delta": {
      "description": "B minus A; null when exactly one side is undefined.",
      "oneOf": [{"type": "number", "minimum": -1, "maximum": 1}, {"type": "null"}]
    },
    "count": {"type": "integer", "minimum": 0},
    "unit": {"type": "number", "minimum": 0, "maximum": 1},
    "weights": {
      "type": "object",
      "additionalProperties": false,
      "required": ["memory", "information_processing_speed", "reasoning", "attention", "behavioral_restraint"],
      "properties": {
        "memory": {"type": "number", "minimum": 0, "maximum": 10},
        "information_processing_speed": {"type": "number", "minimum": 0, "maximum": 10},
        "reasoning": {"type": "number", "minimum": 0, "maximum": 10},
        "attention": {"type": "number", "minimum": 0, "maximum": 10},
        "behavioral_restraint": {"type": "number", "minimum": 0, "maximum": 10}
      }
    },
    "config": {
      "type": "object",
      "required": ["cohort", "weights_a", "weights_b", "master_seed", "derived_seeds", "policy", "train"],
      "properties": {
        "cohort": {
          "type": "object",
          "required": ["fingerprint", "size"],
          "properties": {
            "fingerprint": {"type": "string", "pattern": "^[0-9a-f]{16}$"},
            "size": {"$ref": "#/$defs/count"}
          }
        },
        "weights_a": {"$ref": "#/$defs/weights"},
        "weights_b": {"$ref": "#/$defs/weights"},
        "master_seed": {"type": "integer", "minimum": 0},
        "derived_seeds": {
          "type": "object",
          "required": ["label_a", "label_b", "split"],
          "additionalProperties": {"type": "string", "pattern": "^[0-9]+$"}
        },
        "policy": {
          "type": "object",
          "required": ["percentile_cut", "positive_count", "weight_high", "weight_low", "weight_span"],
          "properties": {
            "percentile_cut": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "positive_count": {"type": "integer", "minimum": 1},
            "weight_high": {"type": "number"},
            "weight_low": {"type": "number"},
            "weight_span": {"type": "number"}
          }
        },
        "train": {
          "type": "object",
          "required": ["c", "class_balance", "tolerance", "max_iterations", "split_fraction"],
          "properties": {
            "c": {"type": "number", "exclusiveMinimum": 0},
            "class_balance": {"type": "boolean"},
            "tolerance": {"type": "number", "exclusiveMinimum": 0},
            "max_iterations": {"type": "integer", "minimum": 1},
            "split_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
          }
        }
      }
    },
    "confusion": {
      "type": "object",
      "required": ["tp", "fp", "fn", "tn"],
      "additionalProperties": {"$ref": "#/$defs/count"}
    },
    "group_metrics": {
      "type": "object",
      "required": ["group", "count", "selected", "selection_rate", "tpr", "fpr", "ppv", "npv", "confusion"],
      "properties": {
        "group": {"type": "string"},
        "count": {"$ref": "#/$defs/count"},
        "selected": {"$ref": "#/$defs/count"},
        "selection_rate": {"$ref": "#/$defs/unit"},
        "tpr": {"$ref": "#/$defs/rate"},
        "fpr": {"$ref": "#/$defs/rate"},
        "ppv": {"$ref": "#/$defs/rate"},
        "npv": {"$ref": "#/$defs/rate"},
        "confusion": {"$ref": "#/$defs/confusion"}
      }
    },
    "per_attribute": {
      "type": "object",
      "required": ["gender", "age_group", "education_level", "country"]
    },
    "group_metrics_by_attribute": {
      "allOf": [{"$ref": "#/$defs/per_attribute"}],
      "additionalProperties": {"type": "array", "items": {"$ref": "#/$defs/group_metrics"}}
    },
    "score_summary": {
      "type": "object",
      "required": ["group", "count", "min", "q1", "median", "q3", "max"],
      "properties": {
        "group": {"type": "string"},
        "count": {"$ref": "#/$defs/count"},
        "min": {"$ref": "#/$defs/unit"},
        "q1": {"$ref": "#/$defs/unit"},
        "median": {"$ref": "#/$defs/unit"},
        "q3": {"$ref": "#/$defs/unit"},
        "max": {"$ref": "#/$defs/unit"}
      }
    },
    "model_report": {
      "type": "object",
      "required": ["accuracy", "held_out", "population", "label_distribution", "score_distribution", "predictions"],
      "properties": {
        "accuracy": {"$ref": "#/$defs/rate"},
        "held_out": {
          "type": "object",
          "required": ["overall", "groups"],
          "properties": {
            "overall": {"$ref": "#/$defs/group_metrics"},
            "groups": {"$ref": "#/$defs/group_metrics_by_attribute"}
          }
        },
        "population": {
          "type": "object",
          "required": ["overall", "groups"],
          "properties": {
            "overall": {"$ref": "#/$defs/group_metrics"},
            "groups": {"$ref": "#/$defs/group_metrics_by_attribute"}
          }
        },
        "label_distribution": {
          "allOf": [{"$ref": "#/$defs/per_attribute"}],
          "additionalProperties": {
            "type": "array",
            "items": {
              "type": "object",
              "required": ["group", "positives", "negatives", "positive_share"],
              "properties": {
                "group": {"type": "string"},
                "positives": {"$ref": "#/$defs/count"},
                "negatives": {"$ref": "#/$defs/count"},
                "positive_share": {"$ref": "#/$defs/unit"}
              }
            }
          }
        },
        "score_distribution": {
          "allOf": [{"$ref": "#/$defs/per_attribute"}],
          "required": ["overall"],
          "properties": {"overall": {"$ref": "#/$defs/score_summary"}},
          "additionalProperties": {
            "type": "object",
            "required": ["groups", "empty_groups"],
            "properties": {
              "groups": {"type": "array", "items": {"$ref": "#/$defs/score_summary"}},
              "empty_groups": {"type": "array", "items": {"type": "string"}}
            }
          }
        },
        "predictions": {
          "type": "array",
          "items": {
            "type": "object",
            "required": ["candidate_id", "decision_score", "predicted_label", "rank"],
            "properties": {
              "candidate_id": {"type": "string"},
              "decision_score": {"type": "number"},
              "predicted_label": {"enum": [0, 1]},
              "rank": {"type": "integer", "minimum": 1}
            }
          }
        }
      }
    },
    "group_delta": {
      "type": "object",
      "required": ["group", "selection_rate", "tpr", "fpr", "ppv", "npv", "label_positive_share", "score_median"],
      "properties": {
        "group": {"type": "string"},
        "selection_rate": {"$ref": "#/$defs/delta"},
        "tpr": {"$ref": "#/$defs/delta"},
        "fpr": {"$ref": "#/$defs/delta"},
        "ppv": {"$ref": "#/$defs/delta"},
        "npv": {"$ref": "#/$defs/delta"},
        "label_positive_share": {"$ref": "#/$defs/delta"},
        "score_median": {"$ref": "#/$defs/delta"}
      }
    },
    "report": {
      "type": "object",
      "required": ["bases", "models", "deltas", "rank_table"],
      "properties": {
        "bases": {
          "type": "object",
          "required": ["held_out", "population"],
          "additionalProperties": {"type": "string"}
        },
        "models": {
          "type": "object",
          "required": ["A", "B"],
          "properties": {"A": {"$ref": "#/$defs/model_report"}, "B": {"$ref": "#/$defs/model_report"}}
        },
        "deltas": {
          "type": "object",
          "required": ["direction", "accuracy", "selection_rate", "tpr", "fpr", "ppv", "npv", "groups"],
          "properties": {
            "direction": {"const": "B - A"},
            "accuracy": {"$ref": "#/$defs/delta"},
            "selection_rate": {"$ref": "#/$defs/delta"},
            "tpr": {"$ref": "#/$defs/delta"},
            "fpr": {"$ref": "#/$defs/delta"},
            "ppv": {"$ref": "#/$defs/delta"},
            "npv": {"$ref": "#/$defs/delta"},
            "groups": {
              "allOf": [{"$ref": "#/$defs/per_attribute"}],
              "additionalProperties": {"type": "array", "items": {"$ref": "#/$defs/group_delta"}}
            }
          }
        },
        "rank_table": {
          "type": "array",
          "items": {
            "type": "object",
            "required": ["candidate_id", "rank_a", "rank_b", "rank_delta", "score_a", "score_b", "selected_a", "selected_b"],
            "properties": {
              "candidate_id": {"type": "string"},
              "rank_a": {"type": "integer", "minimum": 1},
              "rank_b": {"type": "integer", "minimum": 1},
              "rank_delta": {"type": "integer"},
              "score_a": {"type": "number"},
              "score_b": {"type": "number"},
              "selected_a": {"enum": [0, 1]},
              "selected_b": {"enum": [0, 1]}
            }
          }
        }
      }
    },
    "dataset": {
      "type": "object",
      "required": ["sampling_seed", "top_subset_size", "positive_count", "top_subset_ids", "positive_ids", "scored"],
      "properties": {
        "sampling_seed": {"type": "string", "pattern": "^[0-9]+$"},
        "top_subset_size": {"$ref": "#/$defs/count"},
        "positive_count": {"$ref": "#/$defs/count"},
        "top_subset_ids": {"type": "array", "items": {"type": "string"}},
        "positive_ids": {"type": "array", "items": {"type": "string"}},
        "scored": {
          "type": "array",
          "items": {
            "type": "object",
            "required": ["candidate_id", "composite_score", "rank", "label"],
            "properties": {
              "candidate_id": {"type": "string"},
              "composite_score": {"$ref": "#/$defs/unit"},
              "rank": {"type": "integer", "minimum": 1},
              "label": {"enum": [0, 1]}
            }
          }
        }
      }
    },
    "model": {
      "type": "object",
      "required": ["schema", "schema_version", "feature_order", "feature_weights", "bias", "iterations", "converged", "objective", "dual_objective", "train_ids", "test_ids"],
      "properties": {
        "schema": {"const": "fts.linear_model"},
        "schema_version": {"const": 1},
        "feature_order": {
          "const": ["memory", "information_processing_speed", "reasoning", "attention", "behavioral_restraint"]
        },
        "feature_weights": {"type": "array", "items": {"type": "number"}, "minItems": 5, "maxItems": 5},
        "bias": {"type": "number"},
        "iterations": {"$ref": "#/$defs/count"},
        "converged": {"type": "boolean"},
        "objective": {"type": "number"},
        "dual_objective": {"type": "number"},
        "train_ids": {"type": "array", "items": {"type": "string"}},
        "test_ids": {"type": "array", "items": {"type": "string"}}
      }
    }
  }
}
)schema";

}  // namespace fts
