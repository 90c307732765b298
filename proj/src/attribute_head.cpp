// SPDX-License-Identifier: Apache-2.0
#include "agenet/attribute_head.hpp"

#include <algorithm>
#include <stdexcept>

#include "agenet/ops.hpp"
#include "agenet/parameters.hpp"

namespace agenet {

void AttributeSchema::validate() const {
  if (a_min > a_max) throw std::invalid_argument("schema " + name + ": a_min above a_max");
  if (gender_classes == 0) throw std::invalid_argument("schema " + name + ": no gender classes");
  if (group_boundaries.empty()) throw std::invalid_argument("schema " + name + ": no age groups");
  if (group_boundaries.front() != a_min) {
    throw std::invalid_argument("schema " + name + ": first age group must start at a_min (" +
                                std::to_string(a_min) + ")");
  }
  for (std::size_t i = 1; i < group_boundaries.size(); ++i) {
    if (group_boundaries[i] <= group_boundaries[i - 1]) {
      throw std::invalid_argument("schema " + name + ": group boundaries must strictly increase");
    }
  }
  if (group_boundaries.back() > a_max) {
    throw std::invalid_argument("schema " + name + ": last age group starts above a_max");
  }
}

AttributeSchema AttributeSchema::morph() {
  return {"morph", 16, 77, 2, 4, {16, 45, 60}};
}

AttributeSchema AttributeSchema::utkface() {
  return {"utkface", 1, 100, 2, 4, {1, 18, 45, 60, 75, 90}};
}

AttributeSchema AttributeSchema::lap2016() {
  return {"lap2016", 3, 80, 2, 0, {3, 18, 45, 60, 75}};
}

AttributeSchema AttributeSchema::named(const std::string& name) {
  if (name == "morph") return morph();
  if (name == "utkface") return utkface();
  if (name == "lap2016") return lap2016();
  throw std::invalid_argument("unknown schema '" + name + "' (expected morph, utkface, lap2016)");
}

std::size_t age_group_bin(int age, const AttributeSchema& schema) {
  if (age < schema.a_min || age > schema.a_max) {
    throw std::out_of_range("age group: age " + std::to_string(age) + " outside [" +
                            std::to_string(schema.a_min) + ", " + std::to_string(schema.a_max) +
                            "] of schema " + schema.name);
  }
  const auto it = std::upper_bound(schema.group_boundaries.begin(),
                                   schema.group_boundaries.end(), age);
  return static_cast<std::size_t>(it - schema.group_boundaries.begin()) - 1;
}

AttributeLabels make_attribute_labels(int age, int gender, int ethnicity,
                                      const AttributeSchema& schema) {
  if (gender < 0 || static_cast<std::size_t>(gender) >= schema.gender_classes) {
    throw std::out_of_range("gender label " + std::to_string(gender) + " outside schema " +
                            schema.name);
  }
  if (schema.ethnicity_classes > 0 &&
      (ethnicity < 0 || static_cast<std::size_t>(ethnicity) >= schema.ethnicity_classes)) {
    throw std::out_of_range("ethnicity label " + std::to_string(ethnicity) +
                            " outside schema " + schema.name);
  }
  AttributeLabels l;
  l.gender = gender;
  l.ethnicity = schema.ethnicity_classes > 0 ? ethnicity : 0;
  l.age_group = static_cast<int>(age_group_bin(age, schema));
  return l;
}

Var Affine::apply(Tape& tape, Var x) const {
  return ops::affine(x, tape.parameter(*weight), tape.parameter(*bias));
}

BranchLogits attribute_branches(Tape& tape, Var features, const Affine& gender,
                                const Affine& age_group, const std::optional<Affine>& ethnicity) {
  BranchLogits b{gender.apply(tape, features), age_group.apply(tape, features), std::nullopt};
  if (ethnicity) b.ethnicity = ethnicity->apply(tape, features);
  return b;
}

Var fuse_attributes(const BranchLogits& branches, Var fuse_kernel) {
  std::vector<Var> parts{branches.gender, branches.age_group};
  if (branches.ethnicity) parts.push_back(*branches.ethnicity);
  return ops::conv1d(ops::concat(parts), fuse_kernel);
}

Var final_head(Var global_features, Var second_layer, Var weight, Var bias) {
  if (global_features.shape().size() != 2 || second_layer.shape().size() != 2 ||
      global_features.shape()[0] != second_layer.shape()[0]) {
    throw ShapeError("final_head: batch mismatch " + shape_string(global_features.shape()) +
                     " vs " + shape_string(second_layer.shape()));
  }
  return ops::affine(ops::concat({global_features, second_layer}), weight, bias);
}

Var attr_loss(const BranchLogits& branches, std::span<const AttributeLabels> labels, double alpha,
              double beta, double gamma) {
  std::vector<int> gender, group, ethnicity;
  for (const auto& l : labels) {
    gender.push_back(l.gender);
    group.push_back(l.age_group);
    ethnicity.push_back(l.ethnicity);
  }
  Var loss = ops::add(ops::scale(ops::softmax_xent(branches.age_group, group), alpha),
                      ops::scale(ops::softmax_xent(branches.gender, gender), beta));
  if (branches.ethnicity) {
    loss = ops::add(loss, ops::scale(ops::softmax_xent(*branches.ethnicity, ethnicity), gamma));
  }
  return loss;
}

Var total_loss(Var age_loss, Var attribute_loss) {
  if (age_loss.value().size() != 1 || attribute_loss.value().size() != 1) {
    throw ShapeError("total_loss: both terms must be scalars");
  }
  return ops::add(ops::reshape(age_loss, {}), ops::reshape(attribute_loss, {}));
}

namespace {

Affine make_affine(ParameterSet& params, const std::string& name, std::size_t in,
                   std::size_t out) {
  return {&params.create(name + ".weight", {in, out}), &params.create(name + ".bias", {out})};
}

}  // namespace

AttributeHead::AttributeHead(ParameterSet& params, std::size_t feature_dim,
                             const AttributeSchema& schema, const HeadConfig& cfg,
                             std::size_t output_width)
    : schema_(schema), cfg_(cfg), global_dim_(cfg.global_dim ? cfg.global_dim : feature_dim) {
  schema_.validate();
  if (cfg_.fuse_kernel % 2 == 0) {
    throw std::invalid_argument("head: fuse kernel must be odd, got " +
                                std::to_string(cfg_.fuse_kernel));
  }
  global_ = make_affine(params, "head.global", feature_dim, global_dim_);
  gender_ = make_affine(params, "head.gender", feature_dim, schema_.gender_classes);
  age_group_ = make_affine(params, "head.age_group", feature_dim, schema_.age_groups());
  if (schema_.ethnicity_classes > 0) {
    ethnicity_ = make_affine(params, "head.ethnicity", feature_dim, schema_.ethnicity_classes);
  }
  fuse_ = &params.create("head.fuse.kernel", {cfg_.fuse_kernel});
  final_ = make_affine(params, "head.final", final_input_dim(), output_width);
}

void AttributeHead::initialize(std::mt19937_64& rng, double output_bias) {
  auto init = [&rng](const Affine& a) {
    init_uniform_fan_in(a.weight->value, a.weight->value.dim(0), rng);
    a.bias->value.fill(0.0);
  };
  init(global_);
  init(gender_);
  init(age_group_);
  if (ethnicity_) init(*ethnicity_);
  init_uniform_fan_in(fuse_->value, cfg_.fuse_kernel, rng);
  init(final_);
  final_.bias->value.fill(output_bias);
}

HeadOutput AttributeHead::forward(Tape& tape, Var features) const {
  HeadOutput out;
  out.branches = attribute_branches(tape, features, gender_, age_group_, ethnicity_);
  out.second_layer = fuse_attributes(out.branches, tape.parameter(*fuse_));
  Var global = global_.apply(tape, features);
  out.age_output = final_head(global, out.second_layer, tape.parameter(*final_.weight),
                              tape.parameter(*final_.bias));
  return out;
}

std::vector<Parameter*> AttributeHead::branch_parameters() const {
  std::vector<Parameter*> p{gender_.weight, gender_.bias, age_group_.weight, age_group_.bias};
  if (ethnicity_) {
    p.push_back(ethnicity_->weight);
    p.push_back(ethnicity_->bias);
  }
  return p;
}

}  // namespace agenet
