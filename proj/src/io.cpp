#include "rangekit/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rangekit::io {

namespace {

std::ifstream open_input(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw InputError("truncated file while reading " + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

float get_f32(std::istream& is, const std::string& what) {
  const uint32_t bits = get_u32(is, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

constexpr uint32_t kContainerVersion = 1;

}  // namespace

PointCloud read_velodyne_bin(const std::filesystem::path& path) {
  auto in = open_input(path, true);
  in.seekg(0, std::ios::end);
  const std::streamoff bytes = in.tellg();
  in.seekg(0, std::ios::beg);
  if (bytes % 16 != 0)
    throw InputError(path.string() + ": size " + std::to_string(bytes) +
                     " is not a multiple of 16 bytes (x,y,z,intensity floats)");
  const std::size_t n = static_cast<std::size_t>(bytes) / 16;
  std::vector<float> raw(n * 4);
  if (n > 0 && !in.read(reinterpret_cast<char*>(raw.data()), bytes))
    throw InputError(path.string() + ": short read at byte " +
                     std::to_string(in.gcount()));
  PointCloud cloud(n);
  for (std::size_t i = 0; i < n; ++i) {
    cloud[i].x = raw[4 * i + 0];
    cloud[i].y = raw[4 * i + 1];
    cloud[i].z = raw[4 * i + 2];
    cloud[i].intensity = raw[4 * i + 3];
  }
  return cloud;
}

void write_velodyne_bin(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = open_output(path, true);
  std::vector<float> raw(cloud.size() * 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    raw[4 * i + 0] = cloud[i].x;
    raw[4 * i + 1] = cloud[i].y;
    raw[4 * i + 2] = cloud[i].z;
    raw[4 * i + 3] = cloud[i].intensity;
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * 4));
}

namespace {

void write_grid_container(const std::filesystem::path& path, const char* magic,
                          uint32_t h, uint32_t w, uint32_t c,
                          const float* data, std::size_t count) {
  auto out = open_output(path, true);
  out.write(magic, 4);
  put_u32(out, kContainerVersion);
  put_u32(out, h);
  put_u32(out, w);
  put_u32(out, c);
  for (std::size_t i = 0; i < count; ++i) put_f32(out, data[i]);
}

void read_grid_header(std::istream& in, const std::filesystem::path& path,
                      const char* magic, uint32_t* h, uint32_t* w, uint32_t* c) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0)
    throw InputError(path.string() + ": bad magic, expected " + magic);
  const uint32_t version = get_u32(in, "version");
  if (version != kContainerVersion)
    throw InputError(path.string() + ": unsupported version " + std::to_string(version));
  *h = get_u32(in, "height");
  *w = get_u32(in, "width");
  *c = get_u32(in, "channels");
}

}  // namespace

void write_range_image(const std::filesystem::path& path, const RangeImage& img) {
  write_grid_container(path, "RGRD", static_cast<uint32_t>(img.height()),
                       static_cast<uint32_t>(img.width()),
                       static_cast<uint32_t>(img.channel_count()),
                       img.data.data(), img.data.size());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out.write(reinterpret_cast<const char*>(img.valid.data()),
            static_cast<std::streamsize>(img.valid.size()));
}

RangeImage read_range_image(const std::filesystem::path& path) {
  auto in = open_input(path, true);
  uint32_t h, w, c;
  read_grid_header(in, path, "RGRD", &h, &w, &c);
  RangeImage img;
  img.data = Tensor3f(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data.data()[i] = get_f32(in, "pixel data");
  img.valid.resize(static_cast<std::size_t>(h) * w);
  if (!in.read(reinterpret_cast<char*>(img.valid.data()),
               static_cast<std::streamsize>(img.valid.size())))
    throw InputError(path.string() + ": truncated validity section");
  // Channel identities are positional in the container.
  static const Channel kOrder[6] = {Channel::Range, Channel::X, Channel::Y,
                                    Channel::Z, Channel::Intensity,
                                    Channel::Elongation};
  if (c > 6) throw InputError(path.string() + ": unsupported channel count");
  img.channels.assign(kOrder, kOrder + c);
  return img;
}

void write_bev_grid(const std::filesystem::path& path, const BevGrid& grid) {
  write_grid_container(path, "BEVG",
                       static_cast<uint32_t>(grid.features.height()),
                       static_cast<uint32_t>(grid.features.width()),
                       static_cast<uint32_t>(grid.features.channels()),
                       grid.features.data(), grid.features.size());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  for (uint32_t v : grid.counts) put_u32(out, v);
}

BevGrid read_bev_grid(const std::filesystem::path& path) {
  auto in = open_input(path, true);
  uint32_t h, w, c;
  read_grid_header(in, path, "BEVG", &h, &w, &c);
  BevGrid grid;
  grid.features = Tensor3f(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (std::size_t i = 0; i < grid.features.size(); ++i)
    grid.features.data()[i] = get_f32(in, "cell data");
  grid.counts.resize(static_cast<std::size_t>(h) * w);
  for (auto& v : grid.counts) v = get_u32(in, "cell count");
  return grid;
}

void write_pooled_feature(const std::filesystem::path& path,
                          const std::vector<float>& pooled, int grid,
                          int feature_dim) {
  const std::size_t expect = static_cast<std::size_t>(grid) * grid * grid * feature_dim;
  if (pooled.size() != expect)
    throw InvariantError("write_pooled_feature: vector length mismatch");
  auto out = open_output(path, true);
  out.write("POOL", 4);
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<uint32_t>(grid));
  put_u32(out, static_cast<uint32_t>(feature_dim));
  for (float v : pooled) put_f32(out, v);
}

std::vector<float> read_pooled_feature(const std::filesystem::path& path,
                                       int* grid, int* feature_dim) {
  auto in = open_input(path, true);
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, "POOL", 4) != 0)
    throw InputError(path.string() + ": bad magic, expected POOL");
  const uint32_t version = get_u32(in, "version");
  if (version != kContainerVersion)
    throw InputError(path.string() + ": unsupported version");
  const uint32_t g = get_u32(in, "grid");
  const uint32_t c = get_u32(in, "feature_dim");
  std::vector<float> pooled(static_cast<std::size_t>(g) * g * g * c);
  for (auto& v : pooled) v = get_f32(in, "pooled data");
  if (grid) *grid = static_cast<int>(g);
  if (feature_dim) *feature_dim = static_cast<int>(c);
  return pooled;
}

std::string detections_to_text(const std::vector<Detection>& dets) {
  std::ostringstream os;
  os.precision(17);
  for (const Detection& d : dets) {
    os << d.label << " " << d.score << " " << d.box.cx << " " << d.box.cy
       << " " << d.box.cz << " " << d.box.length << " " << d.box.width << " "
       << d.box.height << " " << d.box.yaw << "\n";
  }
  return os.str();
}

std::vector<Detection> detections_from_text(const std::string& text,
                                            const std::string& source) {
  std::vector<Detection> dets;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Detection d;
    double cx, cy, cz, l, w, h, yaw;
    if (!(ls >> d.label >> d.score >> cx >> cy >> cz >> l >> w >> h >> yaw))
      throw InputError(source + ":" + std::to_string(line_no) +
                       ": expected `class score cx cy cz l w h yaw`");
    d.box = Box3D(cx, cy, cz, l, w, h, yaw);
    dets.push_back(std::move(d));
  }
  return dets;
}

void write_detections(const std::filesystem::path& path,
                      const std::vector<Detection>& dets) {
  auto out = open_output(path, false);
  out << detections_to_text(dets);
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  auto in = open_input(path, false);
  std::ostringstream buf;
  buf << in.rdbuf();
  return detections_from_text(buf.str(), path.string());
}

std::array<double, 3> Transform4::apply(const std::array<double, 3>& p) const {
  return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3],
          m[4] * p[0] + m[5] * p[1] + m[6] * p[2] + m[7],
          m[8] * p[0] + m[9] * p[1] + m[10] * p[2] + m[11]};
}

Transform4 Transform4::inverse() const {
  // Rigid transform: R^T and -R^T t.
  Transform4 inv;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) inv.m[r * 4 + c] = m[c * 4 + r];
  }
  for (int r = 0; r < 3; ++r) {
    inv.m[r * 4 + 3] = -(inv.m[r * 4 + 0] * m[3] + inv.m[r * 4 + 1] * m[7] +
                         inv.m[r * 4 + 2] * m[11]);
  }
  return inv;
}

Transform4 Transform4::compose(const Transform4& a, const Transform4& b) {
  Transform4 out;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a.m[r * 4 + k] * b.m[k * 4 + c];
      out.m[r * 4 + c] = acc;
    }
  }
  return out;
}

std::vector<KittiLabel> read_kitti_labels(const std::filesystem::path& path) {
  auto in = open_input(path, false);
  std::vector<KittiLabel> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    KittiLabel l;
    if (!(ls >> l.type >> l.truncation >> l.occlusion >> l.alpha >> l.bbox[0] >>
          l.bbox[1] >> l.bbox[2] >> l.bbox[3] >> l.height >> l.width >>
          l.length >> l.cam_x >> l.cam_y >> l.cam_z >> l.rotation_y))
      throw InputError(path.string() + ":" + std::to_string(line_no) +
                       ": malformed label line");
    ls >> l.score;  // optional trailing score
    l.dont_care = l.type == "DontCare";
    labels.push_back(std::move(l));
  }
  return labels;
}

KittiCalib read_kitti_calib(const std::filesystem::path& path) {
  auto in = open_input(path, false);
  Transform4 tr_velo_to_cam;
  Transform4 r0_rect;
  bool have_tr = false, have_r0 = false;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "Tr_velo_to_cam:" || key == "Tr_velo_to_cam") {
      for (int i = 0; i < 12; ++i) {
        if (!(ls >> tr_velo_to_cam.m[i]))
          throw InputError(path.string() + ": Tr_velo_to_cam needs 12 values");
      }
      have_tr = true;
    } else if (key == "R0_rect:" || key == "R0_rect" || key == "R_rect") {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          if (!(ls >> r0_rect.m[r * 4 + c]))
            throw InputError(path.string() + ": R0_rect needs 9 values");
        }
      }
      have_r0 = true;
    }
  }
  if (!have_tr)
    throw InputError(path.string() + ": missing Tr_velo_to_cam");
  if (!have_r0)
    throw InputError(path.string() + ": missing R0_rect");
  KittiCalib calib;
  calib.velo_to_cam = Transform4::compose(r0_rect, tr_velo_to_cam);
  return calib;
}

Box3D kitti_label_to_sensor_box(const KittiLabel& label, const KittiCalib& calib) {
  const Transform4 cam_to_velo = calib.velo_to_cam.inverse();
  // The stored location is the bottom-face center in rectified camera
  // coordinates (x right, y down, z forward).
  const auto bottom = cam_to_velo.apply({label.cam_x, label.cam_y, label.cam_z});
  const double yaw = wrap_to_pi(-label.rotation_y - kPi / 2.0);
  return Box3D(bottom[0], bottom[1], bottom[2] + 0.5 * label.height,
               label.length, label.width, label.height, yaw);
}

KittiLabel sensor_box_to_kitti_label(const Box3D& box, const std::string& type,
                                     double score, const KittiCalib& calib) {
  KittiLabel l;
  l.type = type;
  l.score = score;
  l.height = box.height;
  l.width = box.width;
  l.length = box.length;
  const auto cam = calib.velo_to_cam.apply({box.cx, box.cy, box.cz - 0.5 * box.height});
  l.cam_x = cam[0];
  l.cam_y = cam[1];
  l.cam_z = cam[2];
  l.rotation_y = wrap_to_pi(-box.yaw - kPi / 2.0);
  l.alpha = wrap_to_pi(l.rotation_y - std::atan2(cam[0], cam[2]));
  return l;
}

KeyValueConfig parse_config(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (strip(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("config line " + std::to_string(line_no) +
                       ": expected `key = value`");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty())
      throw InputError("config line " + std::to_string(line_no) + ": empty key");
    cfg[key] = value;
  }
  return cfg;
}

KeyValueConfig read_config(const std::filesystem::path& path) {
  auto in = open_input(path, false);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

double config_number(const KeyValueConfig& cfg, const std::string& key,
                     double fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw InputError("config key " + key + ": `" + it->second + "` is not a number");
  }
}

std::string config_string(const KeyValueConfig& cfg, const std::string& key,
                          const std::string& fallback) {
  const auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

void write_object_bank(const std::filesystem::path& dir, const ObjectBank& bank) {
  std::filesystem::create_directories(dir);
  auto index = open_output(dir / "index.txt", false);
  index.precision(17);
  for (std::size_t i = 0; i < bank.entries.size(); ++i) {
    const ObjectBankEntry& e = bank.entries[i];
    const std::string name = "object_" + std::to_string(i) + ".bin";
    index << e.label << " " << e.points.size() << " " << e.box.cx << " "
          << e.box.cy << " " << e.box.cz << " " << e.box.length << " "
          << e.box.width << " " << e.box.height << " " << e.box.yaw << " "
          << name << "\n";
    auto blob = open_output(dir / name, true);
    for (const auto& p : e.points) {
      put_f32(blob, p.x);
      put_f32(blob, p.y);
      put_f32(blob, p.z);
      put_f32(blob, p.intensity);
      put_f32(blob, p.elongation);
      put_u32(blob, static_cast<uint32_t>(p.u));
      put_u32(blob, static_cast<uint32_t>(p.v));
    }
  }
}

ObjectBank read_object_bank(const std::filesystem::path& dir) {
  auto index = open_input(dir / "index.txt", false);
  ObjectBank bank;
  std::string line;
  int line_no = 0;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ObjectBankEntry e;
    std::size_t count = 0;
    double cx, cy, cz, l, w, h, yaw;
    std::string name;
    if (!(ls >> e.label >> count >> cx >> cy >> cz >> l >> w >> h >> yaw >> name))
      throw InputError(dir.string() + "/index.txt:" + std::to_string(line_no) +
                       ": malformed entry");
    e.box = Box3D(cx, cy, cz, l, w, h, yaw);
    auto blob = open_input(dir / name, true);
    e.points.resize(count);
    for (auto& p : e.points) {
      p.x = get_f32(blob, name);
      p.y = get_f32(blob, name);
      p.z = get_f32(blob, name);
      p.intensity = get_f32(blob, name);
      p.elongation = get_f32(blob, name);
      p.u = static_cast<int32_t>(get_u32(blob, name));
      p.v = static_cast<int32_t>(get_u32(blob, name));
    }
    bank.entries.push_back(std::move(e));
  }
  return bank;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<std::array<uint8_t, 3>>& colors) {
  if (!colors.empty() && colors.size() != cloud.size())
    throw InvariantError("write_ply: color count differs from point count");
  auto out = open_output(path, false);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\n"
         "end_header\n";
  out.precision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto c = colors.empty() ? std::array<uint8_t, 3>{200, 200, 200}
                                  : colors[i];
    out << cloud[i].x << " " << cloud[i].y << " " << cloud[i].z << " "
        << static_cast<int>(c[0]) << " " << static_cast<int>(c[1]) << " "
        << static_cast<int>(c[2]) << "\n";
  }
}

PpmImage::PpmImage(int w, int h, std::array<uint8_t, 3> fill)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = fill[0];
    rgb[i + 1] = fill[1];
    rgb[i + 2] = fill[2];
  }
}

void PpmImage::set(int x, int y, std::array<uint8_t, 3> c) {
  if (x < 0 || x >= width || y < 0 || y >= height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  rgb[i] = c[0];
  rgb[i + 1] = c[1];
  rgb[i + 2] = c[2];
}

void write_ppm(const std::filesystem::path& path, const PpmImage& img) {
  auto out = open_output(path, true);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
}

}  // namespace rangekit::io
