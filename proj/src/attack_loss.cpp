#include "depthpatch/attack_loss.hpp"

#include <cmath>

#include "depthpatch/asset_io.hpp"
#include "depthpatch/resample.hpp"

namespace depthpatch {

double adversarial_loss(const std::vector<DepthGrid>& depth_batch,
                        const std::vector<BinaryMask>& mask_batch,
                        std::vector<double>* per_scene, std::vector<Grid>* depth_grads) {
  if (depth_batch.empty() || depth_batch.size() != mask_batch.size())
    fail(Errc::invalid_argument, "adversarial_loss: batches must be aligned and nonempty");

  const double batch_n = double(depth_batch.size());
  double total = 0.0;
  if (per_scene) per_scene->clear();
  if (depth_grads) depth_grads->clear();

  for (size_t s = 0; s < depth_batch.size(); ++s) {
    const DepthGrid& d = depth_batch[s];
    const BinaryMask& m = mask_batch[s];
    if (d.h() != m.h || d.w() != m.w)
      fail(Errc::dimension_mismatch, "adversarial_loss: depth/mask dims mismatch");
    const size_t n = m.count();
    if (n == 0) fail(Errc::empty_mask, "adversarial_loss: empty object mask in a scene");

    double acc = 0.0;
    for (int i = 0; i < d.h(); ++i)
      for (int j = 0; j < d.w(); ++j) {
        if (!m.at(i, j)) continue;
        const double z = d.at(i, j);
        if (!(z > 0.0)) fail(Errc::out_of_range, "adversarial_loss: non-positive depth");
        acc += 1.0 / (z * z);
      }
    const double scene_loss = acc / double(n);
    total += scene_loss;
    if (per_scene) per_scene->push_back(scene_loss);

    if (depth_grads) {
      Grid g(d.h(), d.w());
      const double scale = 1.0 / (double(n) * batch_n);
      for (int i = 0; i < d.h(); ++i)
        for (int j = 0; j < d.w(); ++j) {
          if (!m.at(i, j)) continue;
          const double z = d.at(i, j);
          g.at(i, j) = -2.0 * scale / (z * z * z);
        }
      depth_grads->push_back(std::move(g));
    }
  }
  return total / batch_n;
}

AttackAssets load_attack_assets(const RunConfig& cfg) {
  require_attack_paths(cfg);

  AttackAssets a;
  a.object.image = load_image(cfg.paths.object_image);
  a.object.mask = load_mask(cfg.paths.object_mask);
  a.object.height_m = cfg.object.height_m;
  a.object.validate();

  if (cfg.paths.content_image.empty()) {
    a.content_image = a.object.image;
  } else {
    a.content_image = load_image(cfg.paths.content_image);
    if (!a.content_image.same_dims(a.object.image))
      a.content_image = resize_bilinear(a.content_image, a.object.image.h, a.object.image.w);
  }

  if (cfg.style.enabled) {
    a.style_image = load_image(cfg.paths.style_image);
    if (!a.style_image.same_dims(a.object.image))
      a.style_image = resize_bilinear(a.style_image, a.object.image.h, a.object.image.w);
  } else {
    a.style_image = ImageRGB(a.object.image.h, a.object.image.w, 0.5);
  }

  if (!cfg.paths.shape_mask.empty()) a.shape = load_mask(cfg.paths.shape_mask);

  a.scenes = load_scene_dir(cfg.paths.scene_dir);
  return a;
}

ObjectiveEvaluator::ObjectiveEvaluator(const RunConfig& cfg, const AttackAssets& assets,
                                       std::shared_ptr<DepthModel> model)
    : cfg_(cfg), assets_(assets), model_(std::move(model)) {
  weights_ = StyleWeights{cfg.style.weight_style, cfg.style.weight_content,
                          cfg.style.weight_smoothness, cfg.style.weight_photorealism};
  smoothness_mode_ =
      cfg.style.smoothness_mode == "tv" ? SmoothnessMode::tv : SmoothnessMode::paper;
  if (cfg.style.enabled && cfg.lambda > 0.0) {
    extractor_ = make_feature_extractor(cfg.style, cfg.model.weights_dir);
    style_target_ = build_style_target(*extractor_, assets_.style_image);
    laplacian_ = build_matting_laplacian(assets_.content_image, cfg.style.matting_eps);
  }
}

ObjectiveResult ObjectiveEvaluator::evaluate(const ImageRGB& patch,
                                             const std::vector<RegionParams>& thetas,
                                             const std::vector<BatchItem>& batch,
                                             bool want_grads) const {
  const ImageRGB& object_img = assets_.object.image;
  if (!patch.same_dims(object_img))
    fail(Errc::dimension_mismatch, "patch canvas must match the object canvas");
  if (batch.empty()) fail(Errc::invalid_argument, "objective needs a nonempty batch");

  const int cw = object_img.w, ch = object_img.h;
  const BinaryMask* shape = assets_.shape ? &*assets_.shape : nullptr;
  const PatchMaskCtx mask_ctx = build_patch_mask(thetas, cw, ch, cfg_.region.tanh_k, shape);

  const ImageRGB adv_object = apply_patch(object_img, mask_ctx.values, patch);

  // Patch footprint for the patch-oriented baseline loss.
  BinaryMask footprint;
  const bool patch_mode = cfg_.adv_mask_mode == "patch";
  if (patch_mode) {
    footprint = BinaryMask(ch, cw);
    for (int i = 0; i < ch; ++i)
      for (int j = 0; j < cw; ++j)
        footprint.at(i, j) =
            (mask_ctx.values.at(i, j) >= 0.5 && assets_.object.mask.at(i, j)) ? 1 : 0;
  }

  std::vector<DepthGrid> depths;
  std::vector<BinaryMask> loss_masks;
  std::vector<TransformCtx> tctxs(batch.size());
  std::vector<PasteCtx> pctxs(batch.size());
  std::vector<ImageRGB> composites;
  depths.reserve(batch.size());
  loss_masks.reserve(batch.size());
  composites.reserve(batch.size());

  PhysicalObject adv_phys{adv_object, assets_.object.mask, assets_.object.height_m};
  for (size_t bi = 0; bi < batch.size(); ++bi) {
    const BatchItem& item = batch[bi];
    if (item.scene_index < 0 || item.scene_index >= int(assets_.scenes.size()))
      fail(Errc::invalid_argument, "batch scene index out of range");
    const SceneAsset& scene = assets_.scenes[item.scene_index];

    const PhysicalObject transformed = apply_transform(adv_phys, item.spec, &tctxs[bi]);
    const Composite comp = paste(scene.background, transformed, scene.camera,
                                 item.spec.horizontal_col, &pctxs[bi]);

    depths.push_back(predict_depth(*model_, comp.scene_adv));
    if (patch_mode) {
      const BinaryMask warped = warp_mask(tctxs[bi], footprint);
      loss_masks.push_back(
          transport_mask(pctxs[bi], warped, scene.background.h, scene.background.w));
    } else {
      loss_masks.push_back(comp.scene_mask);
    }
    composites.push_back(comp.scene_adv);
  }

  ObjectiveResult out;
  std::vector<Grid> depth_grads;
  out.losses.adv = adversarial_loss(depths, loss_masks, &out.losses.per_scene_adv,
                                    want_grads ? &depth_grads : nullptr);
  out.losses.mask = mask_loss(thetas, cw, ch);
  out.ratio = region_ratio(thetas, assets_.object.mask);

  ImageRGB style_grad(ch, cw);
  if (extractor_) {
    out.losses.style_terms =
        style_transfer_loss(patch, assets_.content_image, style_target_, *extractor_, laplacian_,
                            weights_, smoothness_mode_, want_grads ? &style_grad : nullptr);
    out.losses.style_total = out.losses.style_terms.total;
  }
  out.losses.total = out.losses.adv + out.losses.mask + cfg_.lambda * out.losses.style_total;

  if (!want_grads) return out;

  // Backward: depth -> composite -> transformed object -> adversarial object.
  ImageRGB grad_adv_object(ch, cw);
  for (size_t bi = 0; bi < batch.size(); ++bi) {
    const ImageRGB grad_scene =
        depth_gradient(*model_, composites[bi], depth_grads[bi]);
    const ImageRGB grad_transformed = paste_vjp(pctxs[bi], grad_scene);
    const ImageRGB grad_obj = apply_transform_vjp(tctxs[bi], grad_transformed);
    for (size_t i = 0; i < grad_adv_object.v.size(); ++i) grad_adv_object.v[i] += grad_obj.v[i];
  }

  // Through O' = O(1-m) + x'm to the patch and the mask values.
  const PatchComposeGrads pg =
      apply_patch_vjp(object_img, mask_ctx.values, patch, grad_adv_object);

  out.grad_patch = pg.grad_patch;
  if (extractor_) {
    for (size_t i = 0; i < out.grad_patch.v.size(); ++i)
      out.grad_patch.v[i] += cfg_.lambda * style_grad.v[i];
  }

  out.grad_thetas = patch_mask_vjp(mask_ctx, pg.grad_mask);
  const std::vector<EdgeGrad> mg = mask_loss_grad(thetas, cw, ch);
  for (size_t r = 0; r < out.grad_thetas.size(); ++r)
    for (int e = 0; e < 4; ++e) out.grad_thetas[r][e] += mg[r][e];

  return out;
}

}  // namespace depthpatch
