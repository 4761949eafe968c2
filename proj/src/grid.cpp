#include "muq/grid.hpp"

#include <cmath>

#include "muq/io.hpp"
#include "muq/rng.hpp"

namespace muq {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr std::uint32_t kGridVersion = 1;
}  // namespace

VoxelGrid gen_single_fiber(int n, double c_f) {
    if (n < 2) throw OutOfRangeError("grid needs n >= 2");
    if (!(c_f >= 0.0 && c_f <= 1.0)) throw OutOfRangeError("fiber volume fraction outside [0, 1]");
    VoxelGrid g(n);
    if (c_f == 0.0) return g;
    const double r2 = c_f / kPi;
    // Center-point membership test in the 2-3 cross-section.
    for (int z = 0; z < n; ++z) {
        for (int y = 0; y < n; ++y) {
            const double dy = (y + 0.5) / n - 0.5;
            const double dz = (z + 0.5) / n - 0.5;
            if (dy * dy + dz * dz <= r2) {
                for (int x = 0; x < n; ++x) g.at(x, y, z) = 1;
            }
        }
    }
    return g;
}

VoxelGrid gen_spheres_rsa(int n, double c_f, const RsaConfig& cfg, RsaStats* stats) {
    if (n < 2) throw OutOfRangeError("grid needs n >= 2");
    if (!(c_f >= 0.0 && c_f < 0.5)) throw OutOfRangeError("sphere volume fraction outside [0, 0.5)");
    if (!(cfg.sphere_radius > 0.0 && cfg.sphere_radius < 0.5))
        throw OutOfRangeError("sphere radius outside (0, 0.5)");
    if (cfg.max_attempts <= 0) throw OutOfRangeError("max_attempts must be > 0");

    VoxelGrid g(n);
    RsaStats local;
    const auto total = static_cast<double>(g.size());
    std::size_t filled = 0;

    if (c_f > 0.0) {
        Rng rng(cfg.seed);
        const double r = cfg.sphere_radius;
        const double r2 = r * r;
        const int reach = static_cast<int>(std::ceil(r * n + 0.5));
        std::vector<std::size_t> candidate;
        candidate.reserve(static_cast<std::size_t>(8 * reach) * reach * reach);

        while (static_cast<double>(filled) / total < c_f && local.attempts < cfg.max_attempts) {
            ++local.attempts;
            const double cx = rng.uniform();
            const double cy = rng.uniform();
            const double cz = rng.uniform();

            candidate.clear();
            bool overlap = false;
            const int ix = static_cast<int>(std::floor(cx * n));
            const int iy = static_cast<int>(std::floor(cy * n));
            const int iz = static_cast<int>(std::floor(cz * n));
            for (int dz = -reach; dz <= reach && !overlap; ++dz) {
                const int z = ((iz + dz) % n + n) % n;
                double pz = (z + 0.5) / n - cz;
                pz -= std::round(pz);  // periodic minimum image
                for (int dy = -reach; dy <= reach && !overlap; ++dy) {
                    const int y = ((iy + dy) % n + n) % n;
                    double py = (y + 0.5) / n - cy;
                    py -= std::round(py);
                    for (int dx = -reach; dx <= reach; ++dx) {
                        const int x = ((ix + dx) % n + n) % n;
                        double px = (x + 0.5) / n - cx;
                        px -= std::round(px);
                        if (px * px + py * py + pz * pz <= r2) {
                            const auto idx = static_cast<std::size_t>((z * n + y) * n + x);
                            if (g.data[idx]) {
                                overlap = true;
                                break;
                            }
                            candidate.push_back(idx);
                        }
                    }
                }
            }
            if (overlap || candidate.empty()) continue;
            for (std::size_t idx : candidate) g.data[idx] = 1;
            filled += candidate.size();
            ++local.spheres;
            local.voxels_per_sphere.push_back(static_cast<int>(candidate.size()));
        }

        const double vf = static_cast<double>(filled) / total;
        if (vf < c_f - 0.02)
            throw TargetUnreachableError("RSA exhausted " + std::to_string(local.attempts) +
                                         " attempts at volume fraction " + std::to_string(vf));
    }
    if (stats) *stats = std::move(local);
    return g;
}

VoxelGrid gen_microstructure(MicroKind kind, int n, double c_f, std::uint64_t seed,
                             const RsaConfig& rsa_template) {
    if (kind == MicroKind::Fiber) return gen_single_fiber(n, c_f);
    RsaConfig cfg = rsa_template;
    cfg.seed = seed;
    return gen_spheres_rsa(n, c_f, cfg);
}

double volume_fraction(const VoxelGrid& g) {
    std::size_t count = 0;
    for (std::uint8_t v : g.data) count += v;
    return static_cast<double>(count) / static_cast<double>(g.size());
}

void write_grid(const VoxelGrid& g, const std::string& path) {
    io::BinaryWriter w(path);
    w.magic("MUQG");
    w.u32(kGridVersion);
    w.u32(static_cast<std::uint32_t>(g.n));
    w.bytes(g.data.data(), g.data.size());
    if (!w.good()) throw Error("write failed: " + path);
}

VoxelGrid read_grid(const std::string& path) {
    io::BinaryReader r(path);
    r.expect_magic("MUQG");
    if (r.u32() != kGridVersion) throw CorruptFileError("unsupported grid version in " + path);
    const auto n = static_cast<int>(r.u32());
    if (n < 2 || n > 4096) throw CorruptFileError("implausible grid size in " + path);
    VoxelGrid g(n);
    r.bytes(g.data.data(), g.data.size());
    for (std::uint8_t v : g.data)
        if (v > 1) throw CorruptFileError("non-binary voxel in " + path);
    return g;
}

}  // namespace muq
