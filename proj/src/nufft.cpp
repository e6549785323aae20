#include "rgmc/nufft.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <tuple>

#include "fft_internal.hpp"

namespace rgmc {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBandSlack = 1e-9;

// Beatty et al. choice of the Kaiser-Bessel shape parameter for a given
// oversampling ratio and kernel width.
double kb_beta(double sigma, int width) {
    const double t = (width / sigma) * (sigma - 0.5);
    return kPi * std::sqrt(std::max(0.0, t * t - 0.8));
}

// Continuous Fourier transform of the normalized KB window at frequency xi
// (window support [-W/2, W/2], unit peak normalization I0(beta)).
double kb_hat(double beta, int width, double xi) {
    const double g2 = beta * beta - std::pow(kPi * width * xi, 2);
    double shape;
    if (g2 > 0.0) {
        const double g = std::sqrt(g2);
        shape = std::sinh(g) / g;
    } else if (g2 < 0.0) {
        const double g = std::sqrt(-g2);
        shape = std::sin(g) / g;
    } else {
        shape = 1.0;
    }
    return width * shape / std::cyl_bessel_i(0.0, beta);
}

double kb_window(double beta, int width, double z) {
    const double u = 2.0 * z / width;
    const double t = 1.0 - u * u;
    if (t <= 0.0) return 0.0;
    return std::cyl_bessel_i(0.0, beta * std::sqrt(t)) / std::cyl_bessel_i(0.0, beta);
}

}  // namespace

void NufftConfig::validate() const {
    if (!(oversampling >= 1.25)) {
        throw InvalidParameterError("NufftConfig: oversampling must be >= 1.25");
    }
    if (kernel_width < 2 || kernel_width > 16) {
        throw InvalidParameterError("NufftConfig: kernel_width must be in [2, 16]");
    }
    if (!(tolerance > 0.0)) {
        throw InvalidParameterError("NufftConfig: tolerance must be positive");
    }
}

bool in_band(const Vec3& k, const Vec3& voxel_mm) {
    for (int a = 0; a < 3; ++a) {
        if (!std::isfinite(k[a])) return false;
        if (std::abs(k[a] * voxel_mm[a]) > kPi * (1.0 + kBandSlack)) return false;
    }
    return true;
}

void require_in_band(std::span<const Vec3> kpts, const Vec3& voxel_mm) {
    for (std::size_t i = 0; i < kpts.size(); ++i) {
        if (!in_band(kpts[i], voxel_mm)) {
            std::ostringstream os;
            os << "non-uniform point " << i << " outside the representable band";
            throw BandLimitError(os.str());
        }
    }
}

struct NufftEngine::Impl {
    Shape3 n{};    // image dims
    Shape3 nos{};  // oversampled dims (even)
    Vec3 voxel{};
    int width = 0;
    double beta[3] = {};
    // Per-axis cubic-interpolation table of the window on [0, W/2] + guards.
    std::array<std::vector<double>, 3> table;
    double table_step = 0.0;
    // Per-axis 1/kb_hat evaluated at the image sample offsets.
    std::array<std::vector<double>, 3> invdeapod;

    double window_fast(int axis, double z) const {
        const std::vector<double>& tab = table[axis];
        const double t = std::abs(z) / table_step;
        const std::size_t i0 = static_cast<std::size_t>(t);
        if (i0 + 2 >= tab.size()) return 0.0;
        const double f = t - static_cast<double>(i0);
        // 4-point cubic Lagrange on uniform samples around i0.
        const double ym1 = (i0 == 0) ? tab[1] : tab[i0 - 1];  // window is even in z
        const double y0 = tab[i0];
        const double y1 = tab[i0 + 1];
        const double y2 = tab[i0 + 2];
        const double c1 = 0.5 * (y1 - ym1);
        const double c2 = ym1 - 2.5 * y0 + 2.0 * y1 - 0.5 * y2;
        const double c3 = 0.5 * (y2 - ym1) + 1.5 * (y0 - y1);
        return y0 + f * (c1 + f * (c2 + f * c3));
    }
};

NufftEngine::NufftEngine(Shape3 dims, Vec3 voxel_mm, NufftConfig cfg)
    : impl_(std::make_unique<Impl>()), dims_(dims), voxel_mm_(voxel_mm), cfg_(cfg) {
    cfg.validate();
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 2) throw InvalidParameterError("NufftEngine: dims must be >= 2");
        if (!(voxel_mm[a] > 0.0)) throw InvalidParameterError("NufftEngine: voxel must be > 0");
    }
    Impl& im = *impl_;
    im.n = dims;
    im.voxel = voxel_mm;
    im.width = cfg.kernel_width;
    const int samples_per_unit = 512;
    im.table_step = 1.0 / samples_per_unit;
    const std::size_t count =
        static_cast<std::size_t>(im.width / 2.0 * samples_per_unit) + 4;
    for (int a = 0; a < 3; ++a) {
        int nos = static_cast<int>(std::ceil(cfg.oversampling * dims[a]));
        nos += nos % 2;  // keep the oversampled grid even
        // The kernel support must fit the oversampled grid.
        nos = std::max(nos, 2 * (im.width / 2 + 2));
        im.nos[a] = nos;
        im.beta[a] = kb_beta(static_cast<double>(nos) / dims[a], im.width);
        if (a > 0 && im.beta[a] == im.beta[a - 1]) {
            im.table[a] = im.table[a - 1];
        } else {
            im.table[a].resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                im.table[a][i] = kb_window(im.beta[a], im.width, i * im.table_step);
            }
        }
        im.invdeapod[a].resize(dims[a]);
        for (int i = 0; i < dims[a]; ++i) {
            const double q = i - dims[a] / 2;
            im.invdeapod[a][i] = 1.0 / kb_hat(im.beta[a], im.width, q / im.nos[a]);
        }
    }
}

NufftEngine::~NufftEngine() = default;

namespace {

struct PointWeights {
    // First (wrapped) oversampled-grid index and W kernel weights per axis.
    std::array<int, 3> first{};
    std::array<std::array<double, 16>, 3> w{};
};

// Computes interpolation weights for one k-point; ok=false marks out-of-band.
inline void make_weights(const NufftEngine::Impl& im, const Vec3& k, PointWeights& pw) {
    for (int a = 0; a < 3; ++a) {
        const double omega = k[a] * im.voxel[a];                   // in (-pi, pi]
        const double g = omega * im.nos[a] / (2.0 * kPi);          // grid units
        const int i0 = static_cast<int>(std::ceil(g - im.width / 2.0));
        pw.first[a] = i0;
        for (int l = 0; l < im.width; ++l) {
            pw.w[a][l] = im.window_fast(a, g - (i0 + l));
        }
    }
}

inline int wrap_index(int m, int nos) {
    int s = m % nos;
    if (s < 0) s += nos;
    return s;
}

}  // namespace

std::vector<std::vector<cdouble>> NufftEngine::type2_batch(
    std::span<const ComplexVolume3D* const> vols, std::span<const Vec3> kpts) const {
    const Impl& im = *impl_;
    for (const ComplexVolume3D* v : vols) {
        if (v->dims != dims_) throw InvalidInputError("nufft type2: volume dims mismatch");
        require_finite(*v, "nufft type2");
    }
    require_in_band(kpts, voxel_mm_);

    const std::size_t nvol = vols.size();
    if (kpts.empty()) return std::vector<std::vector<cdouble>>(nvol);
    const std::size_t nos_total =
        static_cast<std::size_t>(im.nos[0]) * im.nos[1] * im.nos[2];

    // Deapodize, embed centered, and FFT (plain unnormalized sum convention).
    std::vector<std::vector<cdouble>> spectra(nvol);
    for (std::size_t v = 0; v < nvol; ++v) {
        std::vector<cdouble> grid(nos_total, cdouble(0.0, 0.0));
        const ComplexVolume3D& vol = *vols[v];
        const int offx = im.nos[0] / 2 - im.n[0] / 2;
        const int offy = im.nos[1] / 2 - im.n[1] / 2;
        const int offz = im.nos[2] / 2 - im.n[2] / 2;
        for (int z = 0; z < im.n[2]; ++z) {
            const double dz = im.invdeapod[2][z];
            for (int y = 0; y < im.n[1]; ++y) {
                const double dyz = dz * im.invdeapod[1][y];
                const cdouble* src = &vol.data[vol.index(0, y, z)];
                cdouble* dst =
                    &grid[static_cast<std::size_t>(offx) +
                          static_cast<std::size_t>(im.nos[0]) *
                              ((y + offy) + static_cast<std::size_t>(im.nos[1]) * (z + offz))];
                for (int x = 0; x < im.n[0]; ++x) {
                    dst[x] = src[x] * (dyz * im.invdeapod[0][x]);
                }
            }
        }
        spectra[v].resize(nos_total);
        detail::fft3_shifted_raw(im.nos, grid.data(), spectra[v].data(), true, 1.0);
    }

    std::vector<std::vector<cdouble>> out(nvol, std::vector<cdouble>(kpts.size()));
    const int cx = im.nos[0] / 2, cy = im.nos[1] / 2, cz = im.nos[2] / 2;
    PointWeights pw;
    std::array<int, 16> sx{}, sy{}, sz{};
    for (std::size_t p = 0; p < kpts.size(); ++p) {
        make_weights(im, kpts[p], pw);
        for (int l = 0; l < im.width; ++l) {
            sx[l] = wrap_index(pw.first[0] + l + cx, im.nos[0]);
            sy[l] = wrap_index(pw.first[1] + l + cy, im.nos[1]);
            sz[l] = wrap_index(pw.first[2] + l + cz, im.nos[2]);
        }
        for (std::size_t v = 0; v < nvol; ++v) {
            const cdouble* spec = spectra[v].data();
            cdouble acc(0.0, 0.0);
            for (int lz = 0; lz < im.width; ++lz) {
                const double wz = pw.w[2][lz];
                const std::size_t basez = static_cast<std::size_t>(sz[lz]) * im.nos[1];
                for (int ly = 0; ly < im.width; ++ly) {
                    const double wzy = wz * pw.w[1][ly];
                    const cdouble* row = spec + (basez + sy[ly]) * im.nos[0];
                    cdouble rowacc(0.0, 0.0);
                    for (int lx = 0; lx < im.width; ++lx) {
                        rowacc += pw.w[0][lx] * row[sx[lx]];
                    }
                    acc += wzy * rowacc;
                }
            }
            out[v][p] = acc;
        }
    }
    return out;
}

std::vector<cdouble> NufftEngine::type2(const ComplexVolume3D& vol,
                                        std::span<const Vec3> kpts) const {
    const ComplexVolume3D* vp = &vol;
    auto r = type2_batch(std::span<const ComplexVolume3D* const>(&vp, 1), kpts);
    return std::move(r[0]);
}

ComplexVolume3D NufftEngine::type2_adjoint(std::span<const cdouble> samples,
                                           std::span<const Vec3> kpts) const {
    if (samples.size() != kpts.size()) {
        throw InvalidInputError("nufft type2_adjoint: samples/points length mismatch");
    }
    const Impl& im = *impl_;
    require_in_band(kpts, voxel_mm_);

    const std::size_t nos_total =
        static_cast<std::size_t>(im.nos[0]) * im.nos[1] * im.nos[2];
    std::vector<cdouble> grid(nos_total, cdouble(0.0, 0.0));

    const int cx = im.nos[0] / 2, cy = im.nos[1] / 2, cz = im.nos[2] / 2;
    PointWeights pw;
    std::array<int, 16> sx{}, sy{}, sz{};
    for (std::size_t p = 0; p < kpts.size(); ++p) {
        const cdouble s = samples[p];
        if (s == cdouble(0.0, 0.0)) continue;
        make_weights(im, kpts[p], pw);
        for (int l = 0; l < im.width; ++l) {
            sx[l] = wrap_index(pw.first[0] + l + cx, im.nos[0]);
            sy[l] = wrap_index(pw.first[1] + l + cy, im.nos[1]);
            sz[l] = wrap_index(pw.first[2] + l + cz, im.nos[2]);
        }
        for (int lz = 0; lz < im.width; ++lz) {
            const cdouble sz_val = s * pw.w[2][lz];
            const std::size_t basez = static_cast<std::size_t>(sz[lz]) * im.nos[1];
            for (int ly = 0; ly < im.width; ++ly) {
                const cdouble szy = sz_val * pw.w[1][ly];
                cdouble* row = grid.data() + (basez + sy[ly]) * im.nos[0];
                for (int lx = 0; lx < im.width; ++lx) {
                    row[sx[lx]] += pw.w[0][lx] * szy;
                }
            }
        }
    }

    std::vector<cdouble> image_os(nos_total);
    detail::fft3_shifted_raw(im.nos, grid.data(), image_os.data(), false, 1.0);

    ComplexVolume3D out(dims_, voxel_mm_);
    const int offx = im.nos[0] / 2 - im.n[0] / 2;
    const int offy = im.nos[1] / 2 - im.n[1] / 2;
    const int offz = im.nos[2] / 2 - im.n[2] / 2;
    for (int z = 0; z < im.n[2]; ++z) {
        const double dz = im.invdeapod[2][z];
        for (int y = 0; y < im.n[1]; ++y) {
            const double dyz = dz * im.invdeapod[1][y];
            const cdouble* src =
                &image_os[static_cast<std::size_t>(offx) +
                          static_cast<std::size_t>(im.nos[0]) *
                              ((y + offy) + static_cast<std::size_t>(im.nos[1]) * (z + offz))];
            cdouble* dst = &out.data[out.index(0, y, z)];
            for (int x = 0; x < im.n[0]; ++x) {
                dst[x] = src[x] * (dyz * im.invdeapod[0][x]);
            }
        }
    }
    return out;
}

std::shared_ptr<const NufftEngine> get_nufft_engine(Shape3 dims, Vec3 voxel_mm,
                                                    const NufftConfig& cfg) {
    using Key = std::tuple<int, int, int, double, double, double, double, int>;
    static std::map<Key, std::shared_ptr<const NufftEngine>> cache;
    static std::mutex mutex;
    const Key key{dims[0],      dims[1],     dims[2],          voxel_mm[0],
                  voxel_mm[1],  voxel_mm[2], cfg.oversampling, cfg.kernel_width};
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto engine = std::make_shared<const NufftEngine>(dims, voxel_mm, cfg);
    cache[key] = engine;
    return engine;
}

std::vector<cdouble> nufft_type2(const ComplexVolume3D& vol, const NonUniformPoints& pts,
                                 const NufftConfig& cfg) {
    if (pts.coords.empty()) return {};
    return get_nufft_engine(vol.dims, vol.voxel_mm, cfg)->type2(vol, pts.coords);
}

ComplexVolume3D nufft_type2_adjoint(std::span<const cdouble> samples, const NonUniformPoints& pts,
                                    Shape3 dims, Vec3 voxel_mm, const NufftConfig& cfg) {
    return get_nufft_engine(dims, voxel_mm, cfg)->type2_adjoint(samples, pts.coords);
}

}  // namespace rgmc
