#include "uvmakeup/color/losses.hpp"

namespace uvmakeup::color {

double LossWeights::region(uvgeom::Region r) const {
  switch (r) {
    case uvgeom::Region::eyes: return lambda_eyes;
    case uvgeom::Region::lips: return lambda_lips;
    case uvgeom::Region::skin: return lambda_skin;
  }
  return 0.0;
}

void LossWeights::validate() const {
  for (double v : {lambda_adv, lambda_cyc, lambda_per, lambda_hist, lambda_eyes, lambda_lips, lambda_skin}) {
    require(std::isfinite(v) && v >= 0.0, ErrorCategory::invalid_argument,
            "loss weights must be finite and non-negative");
  }
}

bool LossWeights::all_zero() const {
  return lambda_adv == 0.0 && lambda_cyc == 0.0 && lambda_per == 0.0 && lambda_hist == 0.0;
}

nlohmann::json to_json(const LossWeights& w) {
  return {{"lambda_adv", w.lambda_adv},   {"lambda_cyc", w.lambda_cyc},
          {"lambda_per", w.lambda_per},   {"lambda_hist", w.lambda_hist},
          {"lambda_eyes", w.lambda_eyes}, {"lambda_lips", w.lambda_lips},
          {"lambda_skin", w.lambda_skin}};
}

LossWeights loss_weights_from_json(const nlohmann::json& j, LossWeights w) {
  auto read = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = j.at(key).get<double>();
  };
  read("lambda_adv", w.lambda_adv);
  read("lambda_cyc", w.lambda_cyc);
  read("lambda_per", w.lambda_per);
  read("lambda_hist", w.lambda_hist);
  read("lambda_eyes", w.lambda_eyes);
  read("lambda_lips", w.lambda_lips);
  read("lambda_skin", w.lambda_skin);
  w.validate();
  return w;
}

double hist_loss(const TextureMap& output, const TextureMap& source, const TextureMap& reference,
                 const uvgeom::RegionMaskSet& regions, const LossWeights& w) {
  require_same_size(output, source, "hist_loss");
  const auto targets = hist_targets<double>(source, reference, regions, w);
  nn::NoGradGuard guard;
  const nn::Var<double> out(nn::to_tensor<double>(output));
  return hist_loss(out, targets).item();
}

}  // namespace uvmakeup::color
