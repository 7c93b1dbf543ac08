#include "urbanmap/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <jpeglib.h>
#include <png.h>

#include <nlohmann/json.hpp>

namespace urbanmap {

namespace fs = std::filesystem;

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= sizeof kPng && std::memcmp(bytes.data(), kPng, sizeof kPng) == 0) {
    return ImageFormat::Png;
  }
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return ImageFormat::Jpeg;
  }
  return ImageFormat::Unknown;
}

namespace {

GeoRaster decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("png decode: ") + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0 &&
                    (image.format & PNG_FORMAT_FLAG_ALPHA) == 0 &&
                    (image.format & PNG_FORMAT_FLAG_COLORMAP) == 0;
  const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  image.format = gray ? PNG_FORMAT_GRAY : (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB);
  const int channels = gray ? 1 : (alpha ? 4 : 3);
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("png decode: " + msg);
  }
  const Index w = image.width, h = image.height;
  GeoRaster out(w, h, gray ? 1 : 3);
  if (channels != 4) {
    std::memcpy(out.storage().data(), buffer.data(), buffer.size());
  } else {
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        const std::size_t src = static_cast<std::size_t>((y * w + x) * 4);
        for (int b = 0; b < 3; ++b) out(x, y, b) = buffer[src + b];
      }
    }
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Corrupt-data warnings (level -1) abort the decode; a truncated tile is not a tile.
void jpeg_emit_message(j_common_ptr cinfo, int level) {
  if (level < 0) jpeg_error_exit(cinfo);
}

GeoRaster decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  std::vector<std::uint8_t> pixels;
  JDIMENSION width = 0, height = 0;
  int channels = 0;

  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  jerr.pub.emit_message = jpeg_emit_message;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError(std::string("jpeg decode: ") + jerr.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, const_cast<unsigned char*>(bytes.data()), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space != JCS_GRAYSCALE) cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = cinfo.output_width;
  height = cinfo.output_height;
  channels = cinfo.output_components;
  pixels.resize(static_cast<std::size_t>(width) * height * channels);
  while (cinfo.output_scanline < height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  if (channels != 1 && channels != 3) throw IoError("jpeg decode: unsupported channel count");
  GeoRaster out(width, height, channels);
  std::memcpy(out.storage().data(), pixels.data(), pixels.size());
  return out;
}

}  // namespace

GeoRaster decode_image(std::span<const std::uint8_t> bytes) {
  switch (sniff_format(bytes)) {
    case ImageFormat::Png: return decode_png(bytes);
    case ImageFormat::Jpeg: return decode_jpeg(bytes);
    case ImageFormat::Unknown: break;
  }
  throw IoError("payload is neither PNG nor JPEG");
}

Bytes encode_png(const GeoRaster& raster) {
  if (raster.empty()) throw DimensionError("cannot encode an empty raster");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width());
  image.height = static_cast<png_uint_32>(raster.height());
  image.format = raster.bands() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  const auto* pixels = raster.storage().data();
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw IoError(std::string("png encode: ") + image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw IoError(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  thread_local std::mt19937_64 rng{std::random_device{}()};
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(rng());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename into '" + path.string() + "': " + ec.message());
  }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

fs::path sidecar_path(const fs::path& image_path) {
  fs::path p = image_path;
  p.replace_extension(".meta.json");
  return p;
}

nlohmann::json meta_to_json(const RasterMeta& meta) {
  nlohmann::json doc = {
      {"origin_px", {meta.transform.origin_px.x(), meta.transform.origin_px.y()}},
      {"zoom", meta.transform.zoom},
      {"scale_m_per_px", meta.transform.scale_m_per_px},
  };
  if (meta.palette) doc["palette"] = typology_to_json(*meta.palette).at("classes");
  return doc;
}

RasterMeta meta_from_json(const nlohmann::json& doc) {
  try {
    RasterMeta meta;
    const auto& origin = doc.at("origin_px");
    meta.transform.origin_px = Eigen::Vector2d(origin.at(0).get<double>(), origin.at(1).get<double>());
    meta.transform.zoom = doc.at("zoom").get<int>();
    meta.transform.scale_m_per_px = doc.at("scale_m_per_px").get<double>();
    if (doc.contains("palette") && !doc.at("palette").is_null()) {
      meta.palette = colormap_from_json(doc.at("palette"));
    }
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("raster sidecar: ") + e.what());
  }
}

namespace {

std::optional<RasterMeta> read_meta(const fs::path& image_path) {
  const fs::path meta = sidecar_path(image_path);
  if (!fs::exists(meta)) return std::nullopt;
  std::ifstream in(meta);
  try {
    return meta_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("sidecar '" + meta.string() + "': " + e.what());
  }
}

}  // namespace

void save_raster(const fs::path& path, const GeoRaster& raster, const std::optional<ColorMap>& palette) {
  write_file_atomic(path, encode_png(raster));
  write_text_atomic(sidecar_path(path), meta_to_json({raster.transform(), palette}).dump(2) + "\n");
}

GeoRaster load_raster(const fs::path& path) {
  GeoRaster r = decode_image(read_file(path));
  if (auto meta = read_meta(path)) r.set_transform(meta->transform);
  return r;
}

void save_labels(const fs::path& path, const LabelRaster& labels) {
  GeoRaster gray(GeoRaster::Storage(labels.classes()), 1, labels.transform());
  save_raster(path, gray, labels.palette());
}

LabelRaster load_labels(const fs::path& path, const std::optional<ColorMap>& palette, int tolerance) {
  const GeoRaster raw = decode_image(read_file(path));
  const auto meta = read_meta(path);
  const ColorMap map = palette ? *palette
                               : (meta && meta->palette ? *meta->palette : ColorMap::standard());
  const GeoTransform transform = meta ? meta->transform : GeoTransform{};
  if (raw.bands() == 1) {
    LabelRaster::Storage classes = raw.storage();
    if ((classes >= kNumLabels).any()) {
      throw RangeError("'" + path.string() + "' holds class indices above 4");
    }
    return LabelRaster(std::move(classes), map, transform);
  }
  LabelRaster labels = encode_labels(raw, map, tolerance);
  labels.set_transform(transform);
  return labels;
}

}  // namespace urbanmap
