#include "urbanmap/backend.hpp"

#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <mutex>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "urbanmap/image_io.hpp"

namespace urbanmap {

namespace fs = std::filesystem;

InferenceBackend parse_backend(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view kind = spec.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  if (kind == "constant") {
    if (arg.size() != 1 || arg[0] < '0' || arg[0] > '4') {
      throw ConfigError("constant backend needs a class index 0-4, e.g. constant:3");
    }
    return ConstantBackend{static_cast<ClassLabel>(arg[0] - '0')};
  }
  if (kind == "heuristic") {
    ColorHeuristicBackend b;
    if (!arg.empty()) {
      try {
        b.block = std::stol(std::string(arg));
      } catch (const std::exception&) {
        throw ConfigError("heuristic block size must be an integer");
      }
      if (b.block < 1) throw ConfigError("heuristic block size must be positive");
    }
    return b;
  }
  if (kind == "identity" && arg.empty()) return IdentityBackend{};
  if (kind == "external") {
    if (arg.empty()) throw ConfigError("external backend needs a command, e.g. external:./predict.sh");
    return ExternalBackend{std::string(arg), {}, std::chrono::minutes(30)};
  }
  throw ConfigError("unknown backend '" + std::string(spec) + "'");
}

LabelRaster predict_tile(const ConstantBackend& backend, const GeoRaster& image, const ColorMap& palette) {
  LabelRaster out(image.width(), image.height(), palette, image.transform());
  out.fill({0, 0, image.width(), image.height()}, backend.label);
  return out;
}

LabelRaster predict_tile(const ColorHeuristicBackend& backend, const GeoRaster& image, const ColorMap& palette) {
  if (image.bands() != 3) throw DimensionError("heuristic backend needs RGB tiles");
  LabelRaster out(image.width(), image.height(), palette, image.transform());
  for (Index by = 0; by < image.height(); by += backend.block) {
    for (Index bx = 0; bx < image.width(); bx += backend.block) {
      const Index h = std::min(backend.block, image.height() - by);
      const Index w = std::min(backend.block, image.width() - bx);
      Eigen::Array3d sum = Eigen::Array3d::Zero();
      for (Index y = by; y < by + h; ++y) {
        for (Index x = bx; x < bx + w; ++x) {
          for (int b = 0; b < 3; ++b) sum(b) += image(x, y, b);
        }
      }
      const Eigen::Array3d mean = (sum / static_cast<double>(w * h)).round();
      const Rgb color{static_cast<std::uint8_t>(mean(0)), static_cast<std::uint8_t>(mean(1)),
                      static_cast<std::uint8_t>(mean(2))};
      out.fill({bx, by, w, h}, palette.nearest(color));
    }
  }
  return out;
}

std::string prediction_name(const TileEntry& tile) { return fs::path(tile.image).filename().string(); }

namespace {

std::string tail_of(const fs::path& log, std::size_t max_bytes = 4096) {
  std::ifstream in(log, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.size() > max_bytes) text = "..." + text.substr(text.size() - max_bytes);
  return text;
}

void run_external(const ExternalBackend& backend, const fs::path& manifest_path, const fs::path& out_dir) {
  const fs::path log = out_dir / ".backend.log";
  const std::string script = backend.command + " \"$@\"";
  const std::string manifest_arg = fs::absolute(manifest_path).string();
  const std::string out_arg = fs::absolute(out_dir).string();
  const std::string cwd = backend.working_dir.empty() ? std::string() : backend.working_dir.string();
  const std::string log_path = log.string();

  const pid_t pid = fork();
  if (pid < 0) throw BackendError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    setpgid(0, 0);
    const int fd = open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      dup2(fd, STDOUT_FILENO);
      dup2(fd, STDERR_FILENO);
      close(fd);
    }
    if (!cwd.empty() && chdir(cwd.c_str()) != 0) _exit(126);
    execl("/bin/sh", "sh", "-c", script.c_str(), "sh", manifest_arg.c_str(), out_arg.c_str(),
          static_cast<char*>(nullptr));
    _exit(127);
  }

  const auto deadline = std::chrono::steady_clock::now() + backend.timeout;
  int status = 0;
  for (;;) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0 && errno != EINTR) throw BackendError(std::string("waitpid failed: ") + std::strerror(errno));
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw BackendError("backend timed out after " + std::to_string(backend.timeout.count()) + " ms",
                         std::nullopt, tail_of(log));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (WIFSIGNALED(status)) {
    throw BackendError("backend killed by signal " + std::to_string(WTERMSIG(status)), std::nullopt, tail_of(log));
  }
  const int code = WEXITSTATUS(status);
  if (code != 0) {
    throw BackendError("backend exited with status " + std::to_string(code), code, tail_of(log));
  }
}

void check_prediction(const fs::path& path, const TileEntry& tile) {
  if (!fs::is_regular_file(path)) throw BackendError("backend wrote no prediction for " + tile.image);
  GeoRaster raw;
  try {
    raw = decode_image(read_file(path));
  } catch (const Error& e) {
    throw BackendError("unreadable prediction '" + path.string() + "': " + e.what());
  }
  if (raw.bands() != 1 || raw.width() != tile.size || raw.height() != tile.size) {
    throw BackendError("prediction '" + path.string() + "' has shape " + std::to_string(raw.width()) + "x" +
                       std::to_string(raw.height()) + "x" + std::to_string(raw.bands()) + ", expected " +
                       std::to_string(tile.size) + "x" + std::to_string(tile.size) + "x1");
  }
  if ((raw.storage() >= kNumLabels).any()) {
    throw BackendError("prediction '" + path.string() + "' holds class indices above 4");
  }
}

}  // namespace

std::vector<fs::path> run_inference(const InferenceBackend& backend, const fs::path& manifest_path,
                                    const fs::path& out_dir, unsigned workers) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();
  const std::vector<TileEntry> tiles = manifest.layout.tiles_for(TileRole::Test);
  fs::create_directories(out_dir);

  std::vector<fs::path> outputs;
  for (const TileEntry& t : tiles) outputs.push_back(out_dir / prediction_name(t));

  if (const auto* external = std::get_if<ExternalBackend>(&backend)) {
    run_external(*external, manifest_path, out_dir);
  } else {
    const ColorMap& palette = manifest.layout.palette;
    auto predict_one = [&](std::size_t i) {
      const TileEntry& t = tiles[i];
      LabelRaster pred = std::visit(
          [&](const auto& b) -> LabelRaster {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, IdentityBackend>) {
              return load_labels(root / t.label, palette);
            } else if constexpr (std::is_same_v<B, ExternalBackend>) {
              throw BackendError("unreachable");
            } else {
              return predict_tile(b, load_raster(root / t.image), palette);
            }
          },
          backend);
      write_file_atomic(outputs[i], encode_png(GeoRaster(GeoRaster::Storage(pred.classes()), 1)));
    };

    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      for (std::size_t i = next++; i < tiles.size(); i = next++) {
        try {
          predict_one(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 1; w < std::min<std::size_t>(workers, tiles.size()); ++w) pool.emplace_back(worker);
      worker();
    }
    if (failure) std::rethrow_exception(failure);
  }

  for (std::size_t i = 0; i < tiles.size(); ++i) check_prediction(outputs[i], tiles[i]);
  return outputs;
}

}  // namespace urbanmap
