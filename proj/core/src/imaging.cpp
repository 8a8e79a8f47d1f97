#include "neckface/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "neckface/error.hpp"

namespace neckface {

std::string to_string(AugmentStage stage) {
  switch (stage) {
    case AugmentStage::kNone:
      return "none";
    case AugmentStage::kPretrain:
      return "pretrain";
    case AugmentStage::kFinetune:
      return "finetune";
  }
  return "none";
}

AugmentStage augment_stage_from_string(const std::string& name) {
  if (name == "none") return AugmentStage::kNone;
  if (name == "pretrain") return AugmentStage::kPretrain;
  if (name == "finetune") return AugmentStage::kFinetune;
  throw InvalidArgument("unknown augment stage '" + name + "'");
}

AugmentPolicy AugmentPolicy::for_stage(AugmentStage stage) {
  AugmentPolicy p;
  p.stage = stage;
  if (stage == AugmentStage::kFinetune) p.rotate_range_deg = {-8.0, 8.0};
  return p;
}

Raster to_grayscale(const Raster& image) {
  if (image.channels() == 1) return image;
  if (image.channels() != 3 && image.channels() != 4) {
    throw InvalidArgument("grayscale conversion needs 1, 3 or 4 channels");
  }
  Raster out(image.width(), image.height(), 1);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      out.at(x, y) = 0.299F * image.at(x, y, 0) + 0.587F * image.at(x, y, 1) +
                     0.114F * image.at(x, y, 2);
    }
  }
  return out;
}

Raster resize_bilinear(const Raster& image, int width, int height) {
  if (image.empty()) throw InvalidArgument("cannot resize an empty raster");
  if (width == image.width() && height == image.height()) return image;
  Raster out(width, height, image.channels());
  const double sx = static_cast<double>(image.width()) / width;
  const double sy = static_cast<double>(image.height()) / height;
  const int max_x = image.width() - 1;
  const int max_y = image.height() - 1;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_y));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, max_y);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_x));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, max_x);
      const float wx = static_cast<float>(fx - x0);
      for (int c = 0; c < image.channels(); ++c) {
        const float top = image.at(x0, y0, c) + wx * (image.at(x1, y0, c) - image.at(x0, y0, c));
        const float bot = image.at(x0, y1, c) + wx * (image.at(x1, y1, c) - image.at(x0, y1, c));
        out.at(x, y, c) = top + wy * (bot - top);
      }
    }
  }
  return out;
}

Raster downsample_area(const Raster& image, int factor) {
  if (factor < 1) throw InvalidArgument("downsample factor must be >= 1");
  if (factor == 1) return image;
  const int w = image.width() / factor;
  const int h = image.height() / factor;
  if (w < 1 || h < 1) throw InvalidArgument("downsample factor larger than image");
  Raster out(w, h, image.channels());
  const float inv = 1.0F / static_cast<float>(factor * factor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        float acc = 0.0F;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) acc += image.at(x * factor + dx, y * factor + dy, c);
        }
        out.at(x, y, c) = acc * inv;
      }
    }
  }
  return out;
}

TiledFrame preprocess_pair(const FramePair& pair) {
  const auto check = [](const Raster& r, const char* side) {
    if (r.width() != kCameraWidth || r.height() != kCameraHeight) {
      throw InvalidArgument(std::string(side) + " camera image must be 640x480, got " +
                            std::to_string(r.width()) + "x" + std::to_string(r.height()));
    }
  };
  check(pair.left, "left");
  check(pair.right, "right");

  const Raster left = resize_bilinear(to_grayscale(pair.left), kHalfWidth, kTiledHeight);
  const Raster right = resize_bilinear(to_grayscale(pair.right), kHalfWidth, kTiledHeight);
  TiledFrame frame{Raster(kTiledWidth, kTiledHeight, 1), pair.timestamp_s, pair.participant_id,
                   pair.session_id};
  for (int y = 0; y < kTiledHeight; ++y) {
    for (int x = 0; x < kHalfWidth; ++x) {
      frame.image.at(x, y) = left.at(x, y);
      frame.image.at(x + kHalfWidth, y) = right.at(x, y);
    }
  }
  return frame;
}

AugmentParams sample_augment(const AugmentPolicy& policy, Rng& rng) {
  AugmentParams p;
  if (policy.stage == AugmentStage::kNone) return p;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  // Draw order is fixed so a seed always yields the same triple.
  const bool do_scale = coin(rng) < policy.p_scale;
  const double scale = uniform(rng, policy.scale_range[0], policy.scale_range[1]);
  const bool do_rotate = coin(rng) < policy.p_rotate;
  const double angle = uniform(rng, policy.rotate_range_deg[0], policy.rotate_range_deg[1]);
  const bool do_translate = coin(rng) < policy.p_translate;
  const double tx = uniform(rng, policy.translate_range_px[0], policy.translate_range_px[1]);
  const double ty = uniform(rng, policy.translate_range_px[0], policy.translate_range_px[1]);
  if (do_scale) p.scale = scale;
  if (do_rotate) p.rotate_deg = angle;
  if (do_translate) {
    p.translate_x = tx;
    p.translate_y = ty;
  }
  return p;
}

namespace {

float sample_zero_fill(const Raster& img, double sx, double sy) {
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const double fx = sx - x0;
  const double fy = sy - y0;
  const auto px = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return 0.0;
    return img.at(x, y);
  };
  // Exact pixel hits skip the neighbours so integer shifts are lossless.
  if (fx == 0.0 && fy == 0.0) return static_cast<float>(px(x0, y0));
  const double top = px(x0, y0) * (1.0 - fx) + px(x0 + 1, y0) * fx;
  const double bot = px(x0, y0 + 1) * (1.0 - fx) + px(x0 + 1, y0 + 1) * fx;
  return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

}  // namespace

Raster warp_canvas(const Raster& canvas, const AugmentParams& params) {
  if (canvas.channels() != 1) throw InvalidArgument("warp_canvas expects one channel");
  if (params.is_identity()) return canvas;
  if (params.scale <= 0.0) throw InvalidArgument("scale must be positive");
  Raster out(canvas.width(), canvas.height(), 1);
  const double cx = (canvas.width() - 1) / 2.0;
  const double cy = (canvas.height() - 1) / 2.0;
  const double theta = params.rotate_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double inv_scale = 1.0 / params.scale;
  for (int y = 0; y < canvas.height(); ++y) {
    for (int x = 0; x < canvas.width(); ++x) {
      const double ux = x - cx - params.translate_x;
      const double uy = y - cy - params.translate_y;
      // Inverse rotation, then inverse scale.
      const double sx = cx + inv_scale * (c * ux + s * uy);
      const double sy = cy + inv_scale * (-s * ux + c * uy);
      out.at(x, y) = sample_zero_fill(canvas, sx, sy);
    }
  }
  return out;
}

TiledFrame apply_augment(const TiledFrame& frame, const AugmentParams& params) {
  if (params.is_identity()) return frame;
  const int half = frame.image.width() / 2;
  const int h = frame.image.height();
  TiledFrame out = frame;
  for (int side = 0; side < 2; ++side) {
    Raster canvas(half, h, 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < half; ++x) canvas.at(x, y) = frame.image.at(x + side * half, y);
    }
    const Raster warped = warp_canvas(canvas, params);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < half; ++x) out.image.at(x + side * half, y) = warped.at(x, y);
    }
  }
  return out;
}

TiledFrame augment(const TiledFrame& frame, const AugmentPolicy& policy, Rng& rng) {
  return apply_augment(frame, sample_augment(policy, rng));
}

CnnImage normalize_for_cnn(const Raster& image, int size) {
  if (size < 1) throw InvalidArgument("cnn image size must be positive");
  const Raster resized = resize_bilinear(image, size, size);
  CnnImage out;
  out.size = size;
  out.chw.resize(static_cast<std::size_t>(3) * size * size);
  for (int c = 0; c < 3; ++c) {
    const int src_c = resized.channels() == 1 ? 0 : std::min(c, resized.channels() - 1);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        out.chw[(static_cast<std::size_t>(c) * size + y) * size + x] =
            (resized.at(x, y, src_c) - kImageNetMean[c]) / kImageNetStd[c];
      }
    }
  }
  return out;
}

Raster read_png(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw IoError(path.string(), "cannot read image");
  if (img.depth() != CV_8U) throw DataError(path.string() + ": only 8-bit PNGs are supported");
  const int ch = img.channels();
  if (ch != 1 && ch != 3 && ch != 4) throw DataError(path.string() + ": unsupported channel count");
  const int out_ch = ch == 1 ? 1 : 3;
  Raster out(img.cols, img.rows, out_ch);
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<unsigned char>(y);
    for (int x = 0; x < img.cols; ++x) {
      if (ch == 1) {
        out.at(x, y) = row[x] / 255.0F;
      } else {
        // OpenCV stores BGR(A).
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = row[x * ch + (2 - c)] / 255.0F;
      }
    }
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Raster& image) {
  const int ch = image.channels();
  if (ch != 1 && ch != 3) throw InvalidArgument("write_png supports 1 or 3 channels");
  cv::Mat img(image.height(), image.width(), ch == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = img.ptr<unsigned char>(y);
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < ch; ++c) {
        const float v = std::clamp(image.at(x, y, c), 0.0F, 1.0F);
        const int dst_c = ch == 1 ? 0 : 2 - c;
        row[x * ch + dst_c] = static_cast<unsigned char>(std::lround(v * 255.0F));
      }
    }
  }
  if (!cv::imwrite(path.string(), img)) throw IoError(path.string(), "cannot write image");
}

}  // namespace neckface
