/**
 * Perception degradation: turns ground-truth projected boxes into noisy
 * detections. Misses, fault-window blinding, box edge jitter, confidence
 * noise, and Poisson false positives, all drawn from a substream keyed by
 * (seed, stream, frame_id) so results are independent of evaluation order.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ccsim/core/rng.hpp"
#include "ccsim/geom/camera.hpp"
#include "ccsim/world/scenario.hpp"

namespace ccsim {

constexpr double kConfidenceHeightK = 2.0; // confidence = 1 - k / box_height

inline float detection_confidence(float box_h, double noise_term) {
    const double c = 1.0 - kConfidenceHeightK / std::max(1.0, static_cast<double>(box_h));
    return static_cast<float>(std::clamp(c + noise_term, 0.0, 1.0));
}

inline std::vector<Detection> apply_noise(KeyedRng& rng, const std::vector<ProjectedBox>& truth,
                                          const NoiseModel& model, double sim_time_s,
                                          int image_width_px = 320, int image_height_px = 240) {
    std::vector<Detection> out;
    out.reserve(truth.size());
    for (const auto& tb : truth) {
        if (model.blinded(tb.cls, sim_time_s)) continue;
        if (model.p_miss > 0.0 && rng.bernoulli(model.p_miss)) continue;

        Detection det;
        det.cls = tb.cls;
        det.box = tb.box;
        if (model.box_jitter_px > 0.0) {
            det.box.u_min += static_cast<float>(rng.normal(0.0, model.box_jitter_px));
            det.box.v_min += static_cast<float>(rng.normal(0.0, model.box_jitter_px));
            det.box.w = std::max(1.0f, det.box.w + static_cast<float>(rng.normal(0.0, model.box_jitter_px)));
            det.box.h = std::max(1.0f, det.box.h + static_cast<float>(rng.normal(0.0, model.box_jitter_px)));
        }
        const double cnoise = model.confidence_noise > 0.0 ? rng.normal(0.0, model.confidence_noise) : 0.0;
        det.confidence = detection_confidence(det.box.h, cnoise);
        out.push_back(det);
    }

    if (model.p_false > 0.0) {
        const std::uint32_t n = rng.poisson(model.p_false);
        for (std::uint32_t i = 0; i < n; ++i) {
            Detection det;
            det.cls = static_cast<EntityClass>(rng.next_u64() % 3);
            det.box.w = static_cast<float>(rng.uniform(4.0, image_width_px / 4.0));
            det.box.h = static_cast<float>(rng.uniform(4.0, image_height_px / 4.0));
            det.box.u_min = static_cast<float>(rng.uniform(0.0, image_width_px - det.box.w));
            det.box.v_min = static_cast<float>(rng.uniform(0.0, image_height_px - det.box.h));
            det.confidence = static_cast<float>(rng.uniform(0.3, 0.9));
            out.push_back(det);
        }
    }
    return out;
}

} // namespace ccsim
