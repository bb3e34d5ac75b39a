#include "rangekit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rangekit/kernels.hpp"

namespace rangekit {

void AugmentConfig::validate() const {
  if (flip_probability < 0.0 || flip_probability > 1.0)
    throw InvariantError("AugmentConfig: flip probability outside [0,1]");
  if (rotation_min > rotation_max)
    throw InvariantError("AugmentConfig: rotation range ill-ordered");
  if (!(scale_min > 0.0) || scale_min > scale_max)
    throw InvariantError("AugmentConfig: scale range ill-ordered");
  if (paste_attempts_per_class < 0)
    throw InvariantError("AugmentConfig: negative paste attempts");
}

bool point_in_box(double x, double y, double z, const Box3D& box, double tol) {
  const double c = std::cos(-box.yaw);
  const double s = std::sin(-box.yaw);
  const double dx = x - box.cx;
  const double dy = y - box.cy;
  const double lx = c * dx - s * dy;
  const double ly = s * dx + c * dy;
  const double lz = z - box.cz;
  return std::abs(lx) <= 0.5 * box.length + tol &&
         std::abs(ly) <= 0.5 * box.width + tol &&
         std::abs(lz) <= 0.5 * box.height + tol;
}

void flip_x(PointCloud& cloud, std::vector<Box3D>& boxes) {
  for (LidarPoint& p : cloud) p.y = -p.y;
  for (Box3D& b : boxes) {
    b.cy = -b.cy;
    b.yaw = wrap_to_pi(-b.yaw);
  }
}

void global_rotate(PointCloud& cloud, std::vector<Box3D>& boxes, double theta) {
  const std::size_t n = cloud.size();
  std::vector<float> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = cloud[i].x;
    ys[i] = cloud[i].y;
  }
  kernels::rotate_xy(xs.data(), ys.data(), n, static_cast<float>(std::cos(theta)),
                     static_cast<float>(std::sin(theta)));
  for (std::size_t i = 0; i < n; ++i) {
    cloud[i].x = xs[i];
    cloud[i].y = ys[i];
  }
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  for (Box3D& b : boxes) {
    const double x = b.cx;
    const double y = b.cy;
    b.cx = c * x - s * y;
    b.cy = s * x + c * y;
    b.yaw = wrap_to_pi(b.yaw + theta);
  }
}

void global_scale(PointCloud& cloud, std::vector<Box3D>& boxes, double s) {
  if (!(s > 0.0)) throw InvariantError("global_scale: factor must be positive");
  const float f = static_cast<float>(s);
  for (LidarPoint& p : cloud) {
    p.x *= f;
    p.y *= f;
    p.z *= f;
  }
  for (Box3D& b : boxes) {
    b.cx *= s;
    b.cy *= s;
    b.cz *= s;
    b.length *= s;
    b.width *= s;
    b.height *= s;
  }
}

ObjectBank build_object_bank(const std::vector<LabeledFrame>& frames,
                             const ProjectionSpec& spec) {
  ObjectBank bank;
  for (const LabeledFrame& frame : frames) {
    if (frame.cloud.empty()) continue;
    const ProjectionResult proj = build_range_image(frame.cloud, spec);
    for (const LabeledObject& obj : frame.objects) {
      ObjectBankEntry entry;
      entry.label = obj.label;
      entry.box = obj.box;
      for (std::size_t i = 0; i < frame.cloud.size(); ++i) {
        const auto& e = proj.index_map.points[i];
        if (!e.projected) continue;
        const LidarPoint& p = frame.cloud[i];
        if (!point_in_box(p.x, p.y, p.z, obj.box, 1e-3)) continue;
        entry.points.push_back({p.x, p.y, p.z, p.intensity, p.elongation,
                                e.u, e.v});
      }
      if (entry.points.empty()) {
        ++bank.skipped_empty;
      } else {
        bank.entries.push_back(std::move(entry));
      }
    }
  }
  return bank;
}

namespace {

float bank_channel_value(const ObjectBankEntry::BankPoint& p, float range,
                         Channel c) {
  switch (c) {
    case Channel::Range: return range;
    case Channel::X: return p.x;
    case Channel::Y: return p.y;
    case Channel::Z: return p.z;
    case Channel::Intensity: return p.intensity;
    case Channel::Elongation: return p.elongation;
  }
  return 0.0f;
}

}  // namespace

PasteStats cut_and_paste(RangeImage& img, std::vector<LabeledObject>& objects,
                         const ObjectBank& bank, std::mt19937_64& rng,
                         const AugmentConfig& cfg) {
  cfg.validate();
  if (bank.entries.empty()) throw InputError("cut_and_paste: empty object bank");
  const int range_ch = img.channel_index(Channel::Range);
  if (range_ch < 0) throw InvariantError("cut_and_paste: image lacks a range channel");

  PasteStats stats;

  // Entries per class; classes visited in sorted order for determinism.
  std::map<std::string, std::vector<const ObjectBankEntry*>> by_class;
  for (const ObjectBankEntry& e : bank.entries) by_class[e.label].push_back(&e);

  for (const auto& [label, entries] : by_class) {
    std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
    for (int attempt = 0; attempt < cfg.paste_attempts_per_class; ++attempt) {
      const ObjectBankEntry& entry = *entries[pick(rng)];
      ++stats.attempted;

      bool overlaps = false;
      for (const LabeledObject& existing : objects) {
        if (iou_bev(entry.box, existing.box) > 0.0) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) {
        ++stats.rejected_overlap;
        continue;
      }

      int written = 0;
      for (const auto& p : entry.points) {
        if (p.v < 0 || p.v >= img.height() || p.u < 0 || p.u >= img.width())
          continue;
        const float r = std::sqrt((p.x * p.x + p.y * p.y) + p.z * p.z);
        float* px = img.data.pixel(p.v, p.u);
        if (img.is_valid(p.v, p.u) && px[range_ch] <= r) continue;  // occluded
        for (int c = 0; c < img.channel_count(); ++c) {
          px[c] = bank_channel_value(p, r, img.channels[c]);
        }
        img.valid[static_cast<std::size_t>(p.v) * img.width() + p.u] = 1;
        ++written;
      }
      if (written > 0) {
        objects.push_back({entry.box, entry.label});
        ++stats.pasted;
        stats.pixels_written += written;
      }
    }
  }
  return stats;
}

void mirror_columns(RangeImage& img, std::vector<Box3D>& boxes) {
  const int h = img.height();
  const int w = img.width();
  const int c = img.channel_count();
  const int y_ch = img.channel_index(Channel::Y);
  Tensor3f mirrored(h, w, c);
  std::vector<uint8_t> valid(static_cast<std::size_t>(h) * w, 0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int mu = w - 1 - u;
      const float* src = img.data.pixel(v, u);
      float* dst = mirrored.pixel(v, mu);
      for (int ch = 0; ch < c; ++ch) dst[ch] = src[ch];
      if (y_ch >= 0 && img.is_valid(v, u)) dst[y_ch] = -dst[y_ch];
      valid[static_cast<std::size_t>(v) * w + mu] = img.valid[static_cast<std::size_t>(v) * w + u];
    }
  }
  img.data = std::move(mirrored);
  img.valid = std::move(valid);
  for (Box3D& b : boxes) {
    b.cy = -b.cy;
    b.yaw = wrap_to_pi(-b.yaw);
  }
}

void rotate_columns(RangeImage& img, std::vector<Box3D>& boxes, double theta) {
  const int h = img.height();
  const int w = img.width();
  const int c = img.channel_count();
  const int x_ch = img.channel_index(Channel::X);
  const int y_ch = img.channel_index(Channel::Y);
  if (x_ch < 0 || y_ch < 0)
    throw InvariantError("rotate_columns: image lacks coordinate channels");

  // Azimuth decreases with u, so a +theta rotation shifts columns left.
  const int shift = static_cast<int>(std::lround(theta * w / (2.0 * kPi)));
  Tensor3f rotated(h, w, c);
  std::vector<uint8_t> valid(static_cast<std::size_t>(h) * w, 0);
  const float cs = static_cast<float>(std::cos(theta));
  const float sn = static_cast<float>(std::sin(theta));
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      int nu = (u - shift) % w;
      if (nu < 0) nu += w;
      const float* src = img.data.pixel(v, u);
      float* dst = rotated.pixel(v, nu);
      for (int ch = 0; ch < c; ++ch) dst[ch] = src[ch];
      if (img.is_valid(v, u)) {
        const float x = src[x_ch];
        const float y = src[y_ch];
        dst[x_ch] = cs * x - sn * y;
        dst[y_ch] = sn * x + cs * y;
      }
      valid[static_cast<std::size_t>(v) * w + nu] = img.valid[static_cast<std::size_t>(v) * w + u];
    }
  }
  img.data = std::move(rotated);
  img.valid = std::move(valid);
  const double cd = std::cos(theta);
  const double sd = std::sin(theta);
  for (Box3D& b : boxes) {
    const double x = b.cx;
    const double y = b.cy;
    b.cx = cd * x - sd * y;
    b.cy = sd * x + cd * y;
    b.yaw = wrap_to_pi(b.yaw + theta);
  }
}

}  // namespace rangekit
