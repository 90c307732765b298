// SPDX-License-Identifier: Apache-2.0
#include "agenet/gradcheck_suite.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "agenet/attribute_head.hpp"
#include "agenet/marcu.hpp"
#include "agenet/model.hpp"
#include "agenet/ops.hpp"
#include "agenet/ranking.hpp"

namespace agenet {

GradcheckScope gradcheck_scope_from_string(const std::string& name) {
  if (name == "ops") return GradcheckScope::Ops;
  if (name == "block") return GradcheckScope::Block;
  if (name == "full") return GradcheckScope::Full;
  throw std::invalid_argument("unknown gradcheck scope '" + name + "' (expected ops, block, full)");
}

namespace {

// One randomised instance of a check: inputs plus a scalar loss over them.
struct Case {
  std::vector<NamedInput> inputs;
  InputLoss loss;
};

using CaseFactory = std::function<Case(std::mt19937_64&, std::uint64_t)>;

struct Rand {
  std::mt19937_64& rng;

  std::size_t size(std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
  }
  Tensor uniform(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = d(rng);
    return t;
  }
  /// Values kept at least `gap` away from zero so kinks are never straddled.
  Tensor away_from_zero(Shape shape, double gap = 1e-3) {
    Tensor t = uniform(std::move(shape));
    for (double& v : t.values()) {
      if (std::abs(v) < gap) v = v < 0 ? -gap : gap;
    }
    return t;
  }
  std::size_t odd(std::size_t max_k) { return 1 + 2 * size(0, (max_k - 1) / 2); }
};

Var project(Var out, std::uint64_t seed) { return random_projection(out, seed); }

std::vector<std::pair<std::string, CaseFactory>> op_cases() {
  std::vector<std::pair<std::string, CaseFactory>> c;
  c.emplace_back("affine", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t n = r.size(1, 4), in = r.size(1, 6), out = r.size(1, 5);
    return Case{{{"input", r.uniform({n, in})}, {"weight", r.uniform({in, out})},
                 {"bias", r.uniform({out})}},
                [s](Tape&, std::span<const Var> v) { return project(ops::affine(v[0], v[1], v[2]), s); }};
  });
  c.emplace_back("conv2d", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t k = r.odd(5), stride = r.size(1, 2), pad = r.size(0, k / 2);
    const std::size_t lo = std::max<std::size_t>(1, k > 2 * pad ? k - 2 * pad : 1);
    const std::size_t n = r.size(1, 2), ci = r.size(1, 3), co = r.size(1, 3);
    const std::size_t h = r.size(lo, lo + 4), w = r.size(lo, lo + 4);
    return Case{{{"input", r.uniform({n, ci, h, w})}, {"kernel", r.uniform({co, ci, k, k})},
                 {"bias", r.uniform({co})}},
                [s, stride, pad](Tape&, std::span<const Var> v) {
                  return project(ops::conv2d(v[0], v[1], v[2], stride, pad), s);
                }};
  });
  c.emplace_back("conv2d_nobias", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t k = r.odd(3), stride = r.size(1, 2), pad = r.size(0, k / 2);
    const std::size_t n = r.size(1, 2), ci = r.size(1, 3), co = r.size(1, 3);
    const std::size_t h = r.size(k, k + 4), w = r.size(k, k + 4);
    return Case{{{"input", r.uniform({n, ci, h, w})}, {"kernel", r.uniform({co, ci, k, k})}},
                [s, stride, pad](Tape&, std::span<const Var> v) {
                  return project(ops::conv2d(v[0], v[1], stride, pad), s);
                }};
  });
  c.emplace_back("conv1d", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t k = r.odd(5), n = r.size(1, 3), len = r.size(1, 8);
    return Case{{{"input", r.uniform({n, len})}, {"kernel", r.uniform({k})}},
                [s](Tape&, std::span<const Var> v) { return project(ops::conv1d(v[0], v[1]), s); }};
  });
  c.emplace_back("maxpool2d", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t k = r.size(2, 3), stride = r.size(1, 2), pad = r.size(0, k - 1);
    const std::size_t n = r.size(1, 2), ch = r.size(1, 3), h = r.size(k, 7), w = r.size(k, 7);
    return Case{{{"input", r.uniform({n, ch, h, w})}},
                [s, k, stride, pad](Tape&, std::span<const Var> v) {
                  return project(ops::maxpool2d(v[0], k, stride, pad), s);
                }};
  });
  c.emplace_back("global_avg_pool", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    return Case{{{"input", r.uniform({r.size(1, 3), r.size(1, 4), r.size(1, 5), r.size(1, 5)})}},
                [s](Tape&, std::span<const Var> v) { return project(ops::global_avg_pool(v[0]), s); }};
  });
  c.emplace_back("add", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const Shape sh{r.size(1, 4), r.size(1, 5)};
    return Case{{{"a", r.uniform(sh)}, {"b", r.uniform(sh)}},
                [s](Tape&, std::span<const Var> v) { return project(ops::add(v[0], v[1]), s); }};
  });
  c.emplace_back("mul", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const Shape sh{r.size(1, 3), r.size(1, 3), r.size(1, 4)};
    return Case{{{"a", r.uniform(sh)}, {"b", r.uniform(sh)}},
                [s](Tape&, std::span<const Var> v) { return project(ops::mul(v[0], v[1]), s); }};
  });
  c.emplace_back("mul_channel_broadcast", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t n = r.size(1, 3), ch = r.size(1, 4);
    return Case{{{"x", r.uniform({n, ch, r.size(1, 4), r.size(1, 4)})}, {"weights", r.uniform({n, ch})}},
                [s](Tape&, std::span<const Var> v) {
                  return project(ops::mul_channel_broadcast(v[0], v[1]), s);
                }};
  });
  c.emplace_back("sigmoid", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    return Case{{{"x", r.uniform({r.size(1, 4), r.size(1, 6)}, -4.0, 4.0)}},
                [s](Tape&, std::span<const Var> v) { return project(ops::sigmoid(v[0]), s); }};
  });
  c.emplace_back("relu", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    return Case{{{"x", r.away_from_zero({r.size(1, 4), r.size(1, 6)})}},
                [s](Tape&, std::span<const Var> v) { return project(ops::relu(v[0]), s); }};
  });
  c.emplace_back("scale", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const double f = std::uniform_real_distribution<double>(-3.0, 3.0)(g);
    return Case{{{"x", r.uniform({r.size(1, 4), r.size(1, 6)})}},
                [s, f](Tape&, std::span<const Var> v) { return project(ops::scale(v[0], f), s); }};
  });
  c.emplace_back("concat_rank2", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t n = r.size(1, 3);
    return Case{{{"a", r.uniform({n, r.size(1, 4)})}, {"b", r.uniform({n, r.size(1, 4)})},
                 {"c", r.uniform({n, r.size(1, 4)})}},
                [s](Tape&, std::span<const Var> v) { return project(ops::concat(v), s); }};
  });
  c.emplace_back("concat_rank4", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t n = r.size(1, 2), h = r.size(1, 4), w = r.size(1, 4);
    return Case{{{"a", r.uniform({n, r.size(1, 3), h, w})}, {"b", r.uniform({n, r.size(1, 3), h, w})}},
                [s](Tape&, std::span<const Var> v) { return project(ops::concat(v), s); }};
  });
  c.emplace_back("sum", [](std::mt19937_64& g, std::uint64_t) {
    Rand r{g};
    return Case{{{"x", r.uniform({r.size(1, 4), r.size(1, 5)})}},
                [](Tape&, std::span<const Var> v) { return ops::sum(v[0]); }};
  });
  c.emplace_back("reshape", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t a = r.size(1, 4), b = r.size(1, 4);
    return Case{{{"x", r.uniform({a, b, 2})}},
                [s, a, b](Tape&, std::span<const Var> v) {
                  return project(ops::reshape(v[0], {2 * b, a}), s);
                }};
  });
  c.emplace_back("softmax_xent", [](std::mt19937_64& g, std::uint64_t) {
    Rand r{g};
    const std::size_t n = r.size(1, 4), k = r.size(2, 6);
    std::vector<int> cls;
    for (std::size_t i = 0; i < n; ++i) cls.push_back(static_cast<int>(r.size(0, k - 1)));
    return Case{{{"logits", r.uniform({n, k}, -3.0, 3.0)}},
                [cls](Tape&, std::span<const Var> v) { return ops::softmax_xent(v[0], cls); }};
  });
  c.emplace_back("l1_loss", [](std::mt19937_64& g, std::uint64_t) {
    Rand r{g};
    const std::size_t n = r.size(1, 6);
    Tensor h = r.uniform({n});
    std::vector<double> target;
    const Tensor offset = r.away_from_zero({n});
    for (std::size_t i = 0; i < n; ++i) target.push_back(h[i] + offset[i]);
    return Case{{{"h", h}},
                [target](Tape&, std::span<const Var> v) { return ops::l1_loss(v[0], target); }};
  });
  c.emplace_back("ecr_loss", [](std::mt19937_64& g, std::uint64_t) {
    Rand r{g};
    const int a_min = static_cast<int>(r.size(1, 20));
    const int a_max = a_min + static_cast<int>(r.size(1, 12));
    const IntervalPoints pts = make_interval_points(a_min, a_max);
    const std::size_t n = r.size(1, 4);
    std::vector<RankingLabel> labels;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(encode_ranking_label(a_min + static_cast<int>(r.size(0, a_max - a_min)), pts));
    }
    return Case{{{"h", r.uniform({n, 1}, a_min - 3.0, a_max + 3.0)}},
                [labels, pts](Tape&, std::span<const Var> v) { return ecr_loss(v[0], labels, pts); }};
  });
  return c;
}

std::vector<std::pair<std::string, CaseFactory>> block_cases() {
  std::vector<std::pair<std::string, CaseFactory>> c;
  c.emplace_back("multi_scale_conv", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t n = r.size(1, 2), ci = r.size(1, 3), co = 4 * r.size(1, 2);
    const std::size_t stride = r.size(1, 2), h = r.size(3, 6), w = r.size(3, 6);
    const auto [c1, c3, c5] = branch_widths(co);
    return Case{{{"input", r.uniform({n, ci, h, w})},
                 {"w1", r.uniform({c1, ci, 1, 1})}, {"b1", r.uniform({c1})},
                 {"w3", r.uniform({c3, ci, 3, 3})}, {"b3", r.uniform({c3})},
                 {"w5", r.uniform({c5, ci, 5, 5})}, {"b5", r.uniform({c5})}},
                [s, stride](Tape&, std::span<const Var> v) {
                  return project(multi_scale_conv(v[0], v[1], v[2], v[3], v[4], v[5], v[6], stride), s);
                }};
  });
  c.emplace_back("eca_attention", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t k = r.size(0, 1) ? 5 : 3;
    return Case{{{"input", r.uniform({r.size(1, 2), r.size(1, 8), r.size(1, 4), r.size(1, 4)})},
                 {"kernel", r.uniform({k})}},
                [s](Tape&, std::span<const Var> v) { return project(eca_attention(v[0], v[1]), s); }};
  });
  c.emplace_back("attribute_fusion", [](std::mt19937_64& g, std::uint64_t s) {
    Rand r{g};
    const std::size_t n = r.size(1, 3), gd = r.size(1, 4);
    const AttributeSchema sc = AttributeSchema::morph();
    const std::size_t width = gd + sc.attribute_width();
    return Case{{{"global", r.uniform({n, gd})},
                 {"gender", r.uniform({n, sc.gender_classes})},
                 {"age_group", r.uniform({n, sc.age_groups()})},
                 {"ethnicity", r.uniform({n, sc.ethnicity_classes})},
                 {"fuse", r.uniform({3})},
                 {"final_w", r.uniform({width, 1})},
                 {"final_b", r.uniform({1})}},
                [s](Tape&, std::span<const Var> v) {
                  const BranchLogits b{v[1], v[2], v[3]};
                  return project(final_head(v[0], fuse_attributes(b, v[4]), v[5], v[6]), s);
                }};
  });
  c.emplace_back("attr_loss", [](std::mt19937_64& g, std::uint64_t) {
    Rand r{g};
    const std::size_t n = r.size(1, 4);
    const AttributeSchema sc = AttributeSchema::utkface();
    std::vector<AttributeLabels> labels;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(make_attribute_labels(sc.a_min + static_cast<int>(r.size(0, 99)),
                                             static_cast<int>(r.size(0, 1)),
                                             static_cast<int>(r.size(0, 3)), sc));
    }
    const double a = 0.5 + static_cast<double>(r.size(0, 3)) * 0.25;
    return Case{{{"gender", r.uniform({n, sc.gender_classes}, -2, 2)},
                 {"age_group", r.uniform({n, sc.age_groups()}, -2, 2)},
                 {"ethnicity", r.uniform({n, sc.ethnicity_classes}, -2, 2)}},
                [labels, a](Tape&, std::span<const Var> v) {
                  return attr_loss(BranchLogits{v[0], v[1], v[2]}, labels, a, 1.0, 2.0 - a);
                }};
  });
  return c;
}

SuiteEntry run_cases(const std::string& name, const CaseFactory& factory, std::size_t seeds,
                     std::uint64_t base_seed, double tolerance) {
  SuiteEntry e;
  e.name = name;
  e.tolerance = tolerance;
  GradcheckOptions opts;
  opts.tolerance = tolerance;
  for (std::size_t i = 0; i < seeds; ++i) {
    const std::uint64_t seed = base_seed + i;
    std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 17);
    Case c = factory(rng, seed);
    const GradcheckReport rep = gradcheck(name, c.loss, std::move(c.inputs), opts);
    e.runs += 1;
    e.checked += rep.checked();
    e.unresolved += rep.unresolved();
    e.max_error = std::max(e.max_error, rep.max_error());
    if (!rep.passed() && e.failure.empty()) {
      e.failure = "seed " + std::to_string(seed) + ": " + rep.failure();
    }
  }
  return e;
}

SuiteEntry run_marcu_block(std::size_t seeds, std::uint64_t base_seed, double tolerance) {
  SuiteEntry e;
  e.name = "marcu_block";
  e.tolerance = tolerance;
  GradcheckOptions opts;
  opts.tolerance = tolerance;
  opts.max_elements = 12;
  for (std::size_t i = 0; i < seeds; ++i) {
    const std::uint64_t seed = base_seed + i;
    std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 29);
    Rand r{rng};
    MarcuBlockConfig bc;
    bc.in_channels = r.size(2, 6);
    bc.out_channels = 4 * r.size(1, 2);
    bc.stride = r.size(1, 2);
    bc.attention_kernel = r.size(0, 1) ? 5 : 3;
    ParameterSet params;
    MarcuBlock block(params, "block", bc);
    block.initialize(rng);
    const Tensor x = r.uniform({r.size(1, 2), bc.in_channels, r.size(3, 6), r.size(3, 6)});
    opts.sample_seed = seed;
    const GradcheckReport rep = gradcheck_parameters(
        "marcu_block", params,
        [&](Tape& tape) { return project(block.forward(tape, tape.constant(x)), seed); }, opts);
    e.runs += 1;
    e.checked += rep.checked();
    e.unresolved += rep.unresolved();
    e.max_error = std::max(e.max_error, rep.max_error());
    if (!rep.passed() && e.failure.empty()) {
      e.failure = "seed " + std::to_string(seed) + ": " + rep.failure();
    }
  }
  return e;
}

SuiteEntry run_full(const SuiteOptions& o, std::size_t seeds) {
  SuiteEntry e;
  e.name = "agenet_desk_total_loss";
  e.tolerance = o.full_tolerance;
  GradcheckOptions opts;
  opts.tolerance = o.full_tolerance;
  opts.max_elements = o.full_elements_per_tensor;
  opts.step = o.full_step;
  opts.kink_retries = 2;
  for (std::size_t i = 0; i < seeds; ++i) {
    const std::uint64_t seed = o.base_seed + i;
    ModelConfig mc;
    mc.network = NetworkConfig::desk();
    mc.network.input_resolution = o.full_resolution;
    mc.schema = AttributeSchema::morph();
    AgeNet model(mc);
    model.initialize(seed);
    std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 41);
    Rand r{rng};
    const Tensor images = r.uniform({o.full_batch, 3, o.full_resolution, o.full_resolution}, 0.0, 1.0);
    std::vector<int> ages;
    std::vector<RankingLabel> ranking;
    std::vector<AttributeLabels> attrs;
    for (std::size_t n = 0; n < o.full_batch; ++n) {
      const int age = mc.schema.a_min + static_cast<int>(r.size(0, mc.schema.a_max - mc.schema.a_min));
      ages.push_back(age);
      ranking.push_back(encode_ranking_label(age, model.points()));
      attrs.push_back(make_attribute_labels(age, static_cast<int>(r.size(0, 1)),
                                            static_cast<int>(r.size(0, 3)), mc.schema));
    }
    opts.sample_seed = seed;
    const GradcheckReport rep = gradcheck_parameters(
        e.name, model.parameters(),
        [&](Tape& tape) {
          const ModelOutput out = model.forward(tape, images);
          return total_loss(ecr_loss(out.head.age_output, ranking, model.points()),
                            attr_loss(out.head.branches, attrs, 1.0, 1.0, 1.0));
        },
        opts);
    e.runs += 1;
    e.checked += rep.checked();
    e.unresolved += rep.unresolved();
    e.max_error = std::max(e.max_error, rep.max_error());
    if (!rep.passed() && e.failure.empty()) {
      e.failure = "seed " + std::to_string(seed) + ": " + rep.failure();
    }
  }
  return e;
}

}  // namespace

std::vector<SuiteEntry> run_gradcheck_suite(GradcheckScope scope, const SuiteOptions& options,
                                            const SuiteProgress& progress) {
  std::vector<SuiteEntry> out;
  auto push = [&](SuiteEntry e) {
    if (progress) progress(e);
    out.push_back(std::move(e));
  };
  switch (scope) {
    case GradcheckScope::Ops:
      for (const auto& [name, factory] : op_cases()) {
        push(run_cases(name, factory, options.seeds, options.base_seed, options.op_tolerance));
      }
      break;
    case GradcheckScope::Block: {
      const std::size_t seeds = std::max<std::size_t>(1, options.seeds / 10);
      for (const auto& [name, factory] : block_cases()) {
        push(run_cases(name, factory, seeds, options.base_seed, options.op_tolerance));
      }
      push(run_marcu_block(seeds, options.base_seed, options.op_tolerance));
      break;
    }
    case GradcheckScope::Full:
      push(run_full(options, options.full_seeds));
      break;
  }
  return out;
}

}  // namespace agenet
