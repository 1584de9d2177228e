#pragma once

#include <cstddef>

#include "acrm/tensor.hpp"

namespace acrm {

class Rng;

/// Per-image random crop from a zero-padded copy (pad pixels each side) plus a
/// horizontal flip with probability 1/2. Input and output are N x C x H x W.
Tensor augment_crop_flip(const Tensor& images, std::size_t pad, Rng& rng);

/// Crops a random window covering an area fraction drawn from
/// [scale_min, scale_max] (same aspect ratio as the map) and resizes it back to
/// H x W bilinearly. Applied independently to each map of an N x C x H x W
/// batch; all channels of a map share the window. A range of [1, 1] is the
/// identity.
Tensor feature_random_resized_crop(const Tensor& maps, double scale_min, double scale_max, Rng& rng);

}  // namespace acrm
