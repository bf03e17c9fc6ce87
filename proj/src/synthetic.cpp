#include "dabc/synthetic.hpp"

#include "dabc/errors.hpp"
#include "dabc/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace dabc {

namespace {

struct Vec3
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 normalize(Vec3 a) { return a * (1.0 / std::sqrt(dot(a, a))); }
double component(Vec3 v, int axis) { return axis == 0 ? v.x : (axis == 1 ? v.y : v.z); }

Vec3 mix(Vec3 a, Vec3 b, double t) { return a * (1.0 - t) + b * t; }

/// Pseudo-random value in [0, 1) attached to an integer lattice point.
double lattice_noise(std::uint64_t seed, long i, long j)
{
    const std::uint64_t h = mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ull ^
                                                     static_cast<std::uint64_t>(j)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Bilinearly interpolated lattice noise.
double value_noise(std::uint64_t seed, double u, double v)
{
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const long i = static_cast<long>(fu);
    const long j = static_cast<long>(fv);
    const double a = u - fu;
    const double b = v - fv;
    const double n00 = lattice_noise(seed, i, j);
    const double n10 = lattice_noise(seed, i + 1, j);
    const double n01 = lattice_noise(seed, i, j + 1);
    const double n11 = lattice_noise(seed, i + 1, j + 1);
    return (n00 * (1 - a) + n10 * a) * (1 - b) + (n01 * (1 - a) + n11 * a) * b;
}

/// Pinhole camera at the origin, rotated by yaw (about y) then pitch (about x).
struct Camera
{
    double focal = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    double yaw = 0.0;
    double pitch = 0.0;

    /// World-space direction whose camera-space z component is 1, so the hit parameter is the depth.
    Vec3 ray(double u, double v) const
    {
        const Vec3 d{(u - cx) / focal, -(v - cy) / focal, 1.0};
        const double cp = std::cos(pitch), sp = std::sin(pitch);
        const Vec3 p{d.x, cp * d.y + sp * d.z, -sp * d.y + cp * d.z};
        const double cw = std::cos(yaw), sw = std::sin(yaw);
        return {cw * p.x + sw * p.z, p.y, -sw * p.x + cw * p.z};
    }
};

struct Box
{
    Vec3 lo;
    Vec3 hi;
    Vec3 color;
};

struct Hit
{
    double t = std::numeric_limits<double>::infinity();
    int surface = -1;
    Vec3 normal;
};

/// Axis-aligned plane component(p, axis) == value, facing back towards the camera.
void hit_plane(const Vec3& dir, int axis, double value, int surface, Hit& best)
{
    const double d = component(dir, axis);
    if (std::abs(d) < 1e-12)
        return;
    const double t = value / d;
    if (t > 0.0 && t < best.t) {
        best.t = t;
        best.surface = surface;
        Vec3 n;
        (axis == 0 ? n.x : (axis == 1 ? n.y : n.z)) = d > 0 ? -1.0 : 1.0;
        best.normal = n;
    }
}

void hit_box(const Vec3& dir, const Box& box, int surface, Hit& best)
{
    double t_enter = 0.0;
    double t_exit = std::numeric_limits<double>::infinity();
    int enter_axis = -1;
    for (int axis = 0; axis < 3; ++axis) {
        const double d = component(dir, axis);
        const double lo = component(box.lo, axis);
        const double hi = component(box.hi, axis);
        if (std::abs(d) < 1e-12) {
            if (lo > 0.0 || hi < 0.0)
                return;
            continue;
        }
        double t0 = lo / d;
        double t1 = hi / d;
        if (t0 > t1)
            std::swap(t0, t1);
        if (t0 > t_enter) {
            t_enter = t0;
            enter_axis = axis;
        }
        t_exit = std::min(t_exit, t1);
        if (t_enter > t_exit)
            return;
    }
    if (enter_axis < 0 || t_enter >= best.t)
        return;
    best.t = t_enter;
    best.surface = surface;
    Vec3 n;
    (enter_axis == 0 ? n.x : (enter_axis == 1 ? n.y : n.z)) = component(dir, enter_axis) > 0 ? -1.0 : 1.0;
    best.normal = n;
}

Vec3 random_color(Rng& rng, double lo, double hi)
{
    return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

void store_pixel(SceneSample& s, int y, int x, Vec3 color, Rng& noise)
{
    const double n = 0.01;
    s.rgb.at(0, y, x) = static_cast<float>(std::clamp(color.x + n * noise.normal(), 0.0, 1.0));
    s.rgb.at(1, y, x) = static_cast<float>(std::clamp(color.y + n * noise.normal(), 0.0, 1.0));
    s.rgb.at(2, y, x) = static_cast<float>(std::clamp(color.z + n * noise.normal(), 0.0, 1.0));
}

SceneSample empty_sample(int height, int width, Domain domain)
{
    if (height <= 0 || width <= 0)
        throw ParameterError("scene dimensions must be positive");
    SceneSample s;
    s.domain = domain;
    s.rgb = RgbImage(height, width);
    s.depth = DepthMap(height, width, 0.0);
    s.valid = ValidMask(height, width, 0);
    return s;
}

} // namespace

SceneSample generate_indoor(std::uint64_t seed, int height, int width)
{
    SceneSample s = empty_sample(height, width, Domain::indoor);
    s.id = "indoor_" + std::to_string(seed);
    Rng rng(derive_seed(seed, 0x1d00));

    Camera cam;
    cam.focal = 1.2 * height;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.yaw = rng.uniform(-0.25, 0.25);
    cam.pitch = rng.uniform(-0.08, 0.08);

    const double cam_height = rng.uniform(1.2, 1.6);
    const double ceiling = rng.uniform(2.4, 3.2) - cam_height;
    const double floor = -cam_height;
    const double left = -rng.uniform(1.5, 3.5);
    const double right = rng.uniform(1.5, 3.5);
    const double back = rng.uniform(4.0, 8.5);

    const Vec3 wall_color = random_color(rng, 0.55, 0.9);
    const Vec3 side_color = wall_color * rng.uniform(0.8, 0.95);
    const Vec3 floor_color{rng.uniform(0.35, 0.55), rng.uniform(0.22, 0.35), rng.uniform(0.1, 0.2)};
    const Vec3 ceiling_color{0.92, 0.92, 0.9};
    const std::uint64_t texture_seed = rng.next();

    std::vector<Box> boxes(static_cast<std::size_t>(rng.uniform_int(1, 4)));
    for (auto& box : boxes) {
        const double w = rng.uniform(0.4, 1.2);
        const double h = rng.uniform(0.4, 1.5);
        const double d = rng.uniform(0.4, 1.2);
        const double cx = rng.uniform(left + 0.2 + w / 2, right - 0.2 - w / 2);
        const double z0 = rng.uniform(1.2, std::max(1.3, back - d - 0.1));
        box.lo = {cx - w / 2, floor, z0};
        box.hi = {cx + w / 2, std::min(floor + h, ceiling - 0.1), z0 + d};
        box.color = random_color(rng, 0.15, 0.85);
    }

    const Vec3 light{0.0, ceiling - 0.1, 0.5 * back};
    Rng noise(derive_seed(seed, 0x2a01));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec3 dir = cam.ray(x + 0.5, y + 0.5);
            Hit hit;
            hit_plane(dir, 1, floor, 0, hit);
            hit_plane(dir, 1, ceiling, 1, hit);
            hit_plane(dir, 0, left, 2, hit);
            hit_plane(dir, 0, right, 3, hit);
            hit_plane(dir, 2, back, 4, hit);
            hit_plane(dir, 2, -1.0, 4, hit);
            for (std::size_t b = 0; b < boxes.size(); ++b)
                hit_box(dir, boxes[b], 5 + static_cast<int>(b), hit);

            const Vec3 p = dir * hit.t;
            Vec3 base;
            switch (hit.surface) {
            case 0: {
                const long plank = static_cast<long>(std::floor(p.x / 0.25));
                const double grain = value_noise(texture_seed, p.x * 8.0, p.z * 1.5);
                base = floor_color * (0.8 + 0.3 * lattice_noise(texture_seed, plank, 7) + 0.15 * grain);
                break;
            }
            case 1:
                base = ceiling_color;
                break;
            case 2:
            case 3:
                base = side_color * (0.9 + 0.15 * value_noise(texture_seed + 1, p.y * 3.0, p.z * 3.0));
                break;
            case 4:
                base = wall_color * (0.9 + 0.15 * value_noise(texture_seed + 2, p.x * 3.0, p.y * 3.0));
                break;
            default:
                base = boxes[hit.surface - 5].color *
                       (0.85 + 0.2 * value_noise(texture_seed + 3 + hit.surface, p.x * 5.0 + p.z * 5.0, p.y * 5.0));
                break;
            }
            const Vec3 to_light = light - p;
            const double dist2 = dot(to_light, to_light);
            const double diffuse = std::max(0.0, dot(hit.normal, normalize(to_light)));
            const double shade = 0.35 + 0.9 * diffuse / (1.0 + 0.04 * dist2);
            store_pixel(s, y, x, base * shade, noise);
            s.depth(y, x) = std::clamp(hit.t, kIndoorMinDepth, kIndoorMaxDepth);
            s.valid(y, x) = 1;
        }
    }
    return s;
}

SceneSample generate_outdoor(std::uint64_t seed, int height, int width, bool sparse)
{
    SceneSample s = empty_sample(height, width, Domain::outdoor);
    s.id = "outdoor_" + std::to_string(seed);
    Rng rng(derive_seed(seed, 0x0d00));

    Camera cam;
    cam.focal = 1.9 * height;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.yaw = rng.uniform(-0.12, 0.12);
    cam.pitch = rng.uniform(-0.04, 0.04);

    const double cam_height = rng.uniform(1.5, 1.8);
    const double ground = -cam_height;
    const double road_half = rng.uniform(3.0, 5.0);
    const double left = -rng.uniform(road_half + 1.5, road_half + 8.0);
    const double right = rng.uniform(road_half + 1.5, road_half + 8.0);
    const double left_top = rng.uniform(5.0, 20.0) - cam_height;
    const double right_top = rng.uniform(5.0, 20.0) - cam_height;
    const Vec3 left_color = random_color(rng, 0.35, 0.8);
    const Vec3 right_color = random_color(rng, 0.35, 0.8);
    const Vec3 sky_top{0.35, 0.55, 0.9};
    const Vec3 sky_horizon{0.75, 0.82, 0.92};
    const Vec3 sun = normalize(Vec3{rng.uniform(-1.0, 1.0), rng.uniform(0.4, 1.0), rng.uniform(-0.5, 1.0)});
    const std::uint64_t texture_seed = rng.next();

    std::vector<Box> boxes(static_cast<std::size_t>(rng.uniform_int(0, 4)));
    for (auto& box : boxes) {
        const double w = rng.uniform(1.6, 2.0);
        const double h = rng.uniform(1.3, 1.8);
        const double d = rng.uniform(3.5, 4.8);
        const double cx = rng.uniform(-road_half + w / 2, road_half - w / 2);
        const double z0 = rng.uniform(6.0, 50.0);
        box.lo = {cx - w / 2, ground, z0};
        box.hi = {cx + w / 2, ground + h, z0 + d};
        box.color = random_color(rng, 0.1, 0.9);
    }

    Rng noise(derive_seed(seed, 0x2a02));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec3 dir = cam.ray(x + 0.5, y + 0.5);
            Hit hit;
            hit_plane(dir, 1, ground, 0, hit);
            // facades end at the roofline; rays above it see the sky
            Hit facade;
            hit_plane(dir, 0, left, 1, facade);
            if (facade.surface == 1 && dir.y * facade.t <= left_top && facade.t < hit.t)
                hit = facade;
            facade = Hit{};
            hit_plane(dir, 0, right, 2, facade);
            if (facade.surface == 2 && dir.y * facade.t <= right_top && facade.t < hit.t)
                hit = facade;
            for (std::size_t b = 0; b < boxes.size(); ++b)
                hit_box(dir, boxes[b], 3 + static_cast<int>(b), hit);

            const double elevation = std::clamp(dir.y / std::sqrt(dot(dir, dir)), 0.0, 1.0);
            const Vec3 sky = mix(sky_horizon, sky_top, std::sqrt(elevation));
            if (hit.surface < 0) {
                store_pixel(s, y, x, sky, noise);
                continue;
            }
            const Vec3 p = dir * hit.t;
            Vec3 base;
            if (hit.surface == 0) {
                if (std::abs(p.x) < road_half) {
                    const bool lane = std::abs(p.x) < 0.08 && std::fmod(p.z, 6.0) < 3.0;
                    base = lane ? Vec3{0.9, 0.9, 0.85}
                                : Vec3{0.3, 0.3, 0.32} * (0.85 + 0.3 * value_noise(texture_seed, p.x * 2, p.z * 2));
                } else {
                    base = Vec3{0.3, 0.5, 0.22} * (0.8 + 0.4 * value_noise(texture_seed + 1, p.x * 3, p.z * 3));
                }
            } else if (hit.surface <= 2) {
                const Vec3 wall = hit.surface == 1 ? left_color : right_color;
                const double wy = std::fmod(p.y - ground + 100.0, 3.0);
                const double wz = std::fmod(p.z + 100.0, 3.0);
                const bool window = wy > 1.0 && wy < 2.2 && wz > 0.6 && wz < 2.1;
                base = window ? Vec3{0.15, 0.2, 0.28} : wall;
            } else {
                base = boxes[hit.surface - 3].color;
            }
            const double shade = 0.45 + 0.65 * std::max(0.0, dot(hit.normal, sun));
            const double haze = 1.0 - std::exp(-hit.t / 120.0);
            store_pixel(s, y, x, mix(base * shade, sky_horizon, haze), noise);
            if (hit.t >= kOutdoorMinDepth && hit.t <= kOutdoorMaxDepth) {
                s.depth(y, x) = hit.t;
                s.valid(y, x) = 1;
            }
        }
    }

    if (sparse) {
        Rng keep(derive_seed(seed, 0x5a5e));
        const std::size_t budget = static_cast<std::size_t>(std::floor(kSparseValidFraction * s.depth.size()));
        std::size_t kept = 0;
        for (std::size_t k = 0; k < s.depth.size(); ++k) {
            if (!s.valid.data[k])
                continue;
            if (kept < budget && keep.bernoulli(0.04)) {
                ++kept;
            } else {
                s.valid.data[k] = 0;
                s.depth.data[k] = 0.0;
            }
        }
    }

    // a degenerate view (e.g. all sky) keeps one valid road pixel so the sample stays usable
    if (count_valid(s.valid) == 0) {
        const int y = height - 1;
        const int x = width / 2;
        s.depth(y, x) = std::clamp(cam_height * cam.focal / std::max(1.0, y + 0.5 - cam.cy), kOutdoorMinDepth,
                                   kOutdoorMaxDepth);
        s.valid(y, x) = 1;
    }
    return s;
}

void to_json(nlohmann::json& j, const GeneratorConfig& cfg)
{
    j = nlohmann::json{{"count", cfg.count},   {"height", cfg.height},
                       {"width", cfg.width},   {"seed", cfg.seed},
                       {"domain", to_string(cfg.domain)}, {"sparse", cfg.sparse}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& cfg)
{
    GeneratorConfig out;
    out.count = j.value("count", out.count);
    out.height = j.value("height", out.height);
    out.width = j.value("width", out.width);
    out.seed = j.value("seed", out.seed);
    if (j.contains("domain"))
        out.domain = domain_from_string(j.at("domain").get<std::string>());
    out.sparse = j.value("sparse", out.sparse);
    if (out.count < 0 || out.height <= 0 || out.width <= 0)
        throw ParameterError("generator config needs count >= 0 and positive dimensions");
    cfg = out;
}

std::vector<SceneSample> generate_dataset(const GeneratorConfig& cfg)
{
    std::vector<SceneSample> samples;
    samples.reserve(cfg.count);
    for (int i = 0; i < cfg.count; ++i) {
        const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
        SceneSample s = cfg.domain == Domain::indoor ? generate_indoor(seed, cfg.height, cfg.width)
                                                     : generate_outdoor(seed, cfg.height, cfg.width, cfg.sparse);
        s.id = to_string(cfg.domain) + "_" + std::to_string(i);
        samples.push_back(std::move(s));
    }
    return samples;
}

} // namespace dabc
