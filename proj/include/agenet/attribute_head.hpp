// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "agenet/autodiff.hpp"

// Demographic attribute guidance: gender / age-group / ethnicity branches on the
// shared feature vector, a 1-D convolution over their spliced logits, and the final
// regression layer over [global features, fused attributes].

namespace agenet {

struct AttributeSchema {
  std::string name;
  int a_min = 0;
  int a_max = 0;
  std::size_t gender_classes = 2;
  /// 0 disables the ethnicity branch and its loss term.
  std::size_t ethnicity_classes = 4;
  /// Inclusive lower bound of every age group, strictly increasing; the first equals a_min.
  std::vector<int> group_boundaries;

  std::size_t age_groups() const { return group_boundaries.size(); }
  /// Width of the fused attribute layer: gender + age groups + ethnicity classes.
  std::size_t attribute_width() const {
    return gender_classes + age_groups() + ethnicity_classes;
  }
  void validate() const;

  /// 16..77; groups 16-44, 45-59, 60-77; 2 genders; 4 ethnicities.
  static AttributeSchema morph();
  /// 1..100; groups <18, 18-44, 45-59, 60-74, 75-89, 90-100; 2 genders; 4 ethnicities.
  static AttributeSchema utkface();
  /// 3..80; groups <18, 18-44, 45-59, 60-74, 75-80; 2 genders; no ethnicity branch.
  static AttributeSchema lap2016();
  static AttributeSchema named(const std::string& name);
};

/// Index of the unique group containing `age`. Rejects ages outside [a_min, a_max].
std::size_t age_group_bin(int age, const AttributeSchema& schema);

struct AttributeLabels {
  int gender = 0;
  int ethnicity = 0;
  int age_group = 0;
};

AttributeLabels make_attribute_labels(int age, int gender, int ethnicity,
                                      const AttributeSchema& schema);

struct HeadConfig {
  /// Width of the global fully connected layer; 0 means "backbone feature width".
  std::size_t global_dim = 0;
  std::size_t fuse_kernel = 3;
  double alpha = 1.0;  // age group
  double beta = 1.0;   // gender
  double gamma = 1.0;  // ethnicity
};

struct BranchLogits {
  Var gender;
  Var age_group;
  std::optional<Var> ethnicity;
};

struct Affine {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  Var apply(Tape& tape, Var x) const;
};

/// Independent affine maps from the shared features to each attribute's logits.
BranchLogits attribute_branches(Tape& tape, Var features, const Affine& gender,
                                const Affine& age_group, const std::optional<Affine>& ethnicity);

/// Splice (gender, age group, ethnicity) and apply one length-preserving conv1d.
Var fuse_attributes(const BranchLogits& branches, Var fuse_kernel);

/// concat(global_features, second_layer) -> one affine map.
Var final_head(Var global_features, Var second_layer, Var weight, Var bias);

/// alpha * CE(age group) + beta * CE(gender) + gamma * CE(ethnicity), each summed over
/// the batch. The ethnicity term is dropped when the branch is absent.
Var attr_loss(const BranchLogits& branches, std::span<const AttributeLabels> labels, double alpha,
              double beta, double gamma);

/// L_ecr + L_attr.
Var total_loss(Var age_loss, Var attribute_loss);

struct HeadOutput {
  /// [N, age_output_width]
  Var age_output;
  BranchLogits branches;
  Var second_layer;
};

class AttributeHead {
 public:
  AttributeHead(ParameterSet& params, std::size_t feature_dim, const AttributeSchema& schema,
                const HeadConfig& cfg, std::size_t output_width);

  const HeadConfig& config() const { return cfg_; }
  const AttributeSchema& schema() const { return schema_; }
  std::size_t final_input_dim() const { return global_dim_ + schema_.attribute_width(); }

  /// `output_bias` seeds every element of the final bias (e.g. the centre of the age range).
  void initialize(std::mt19937_64& rng, double output_bias);

  HeadOutput forward(Tape& tape, Var features) const;

  /// Parameters owned by the attribute branches.
  std::vector<Parameter*> branch_parameters() const;

 private:
  AttributeSchema schema_;
  HeadConfig cfg_;
  std::size_t global_dim_;
  Affine global_;
  Affine gender_;
  Affine age_group_;
  std::optional<Affine> ethnicity_;
  Parameter* fuse_ = nullptr;
  Affine final_;
};

}  // namespace agenet
