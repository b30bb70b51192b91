#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "sig2text/error.hpp"
#include "sig2text/waveform.hpp"

namespace sig2text {

struct StftConfig {
    int fft_len = 128;
    int window_len = 128;
    int hop = 0;             // 0: ceil(len / target_frames)
    int target_frames = 128;
    int image_rows = 128;    // resize target (frequency)
    int image_cols = 128;    // resize target (time)
};

/// Non-negative magnitude matrix, rows = frequency (DC-centred, lowest
/// frequency first), cols = time frames, stored row-major.
struct TimeFreqImage {
    int rows = 0;
    int cols = 0;
    std::vector<double> mag;
    double fs = 0.0;
    int window_len = 0;
    int hop = 0;
    int fft_len = 0;

    double& at(int r, int c) { return mag[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return mag[static_cast<std::size_t>(r) * cols + c]; }
};

namespace detail {

// FFTW's planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwPlanDeleter {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};

struct FftwFree {
    void operator()(fftw_complex* p) const { fftw_free(p); }
};

/// Forward complex DFT of a fixed length with its own aligned buffers.
class Dft {
public:
    explicit Dft(int n)
        : n_(n),
          in_(fftw_alloc_complex(static_cast<std::size_t>(n))),
          out_(fftw_alloc_complex(static_cast<std::size_t>(n))) {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan_.reset(fftw_plan_dft_1d(n, in_.get(), out_.get(), FFTW_FORWARD, FFTW_ESTIMATE));
    }

    std::complex<double>* input() { return reinterpret_cast<std::complex<double>*>(in_.get()); }
    const std::complex<double>* output() const { return reinterpret_cast<const std::complex<double>*>(out_.get()); }
    void execute() { fftw_execute(plan_.get()); }
    int size() const { return n_; }

private:
    int n_;
    std::unique_ptr<fftw_complex, FftwFree> in_;
    std::unique_ptr<fftw_complex, FftwFree> out_;
    std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan_;
};

}  // namespace detail

/// Periodic Hann window.
inline std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    return w;
}

/// Hop actually used for a signal of `len` samples.
inline int effective_hop(const StftConfig& cfg, std::size_t len) {
    if (cfg.hop > 0) return cfg.hop;
    const auto frames = static_cast<std::size_t>(std::max(1, cfg.target_frames));
    return static_cast<int>(std::max<std::size_t>(1, (len + frames - 1) / frames));
}

/// |STFT| with a Hann window. The tail is zero-padded so the last frame
/// reaches the end of the pulse. Rows follow the fftshift convention: row r
/// holds frequency (r - fft_len/2) * fs / fft_len.
inline TimeFreqImage stft_magnitude(const IQSignal& signal, const StftConfig& cfg = {}) {
    if (cfg.fft_len <= 0 || cfg.window_len <= 0 || cfg.window_len > cfg.fft_len) {
        throw Error(ErrorCode::InvalidArgument, "need 0 < window_len <= fft_len");
    }
    const std::size_t len = signal.samples.size();
    const auto win_len = static_cast<std::size_t>(cfg.window_len);
    if (len < win_len) {
        throw Error(ErrorCode::InvalidArgument, "signal of " + std::to_string(len) +
                                                    " samples is shorter than one window");
    }
    const int hop = effective_hop(cfg, len);
    const std::size_t steps = (len - win_len + static_cast<std::size_t>(hop) - 1) / static_cast<std::size_t>(hop);
    const int frames = static_cast<int>(steps) + 1;
    const int nfft = cfg.fft_len;

    TimeFreqImage img;
    img.rows = nfft;
    img.cols = frames;
    img.mag.assign(static_cast<std::size_t>(nfft) * frames, 0.0);
    img.fs = signal.fs;
    img.window_len = cfg.window_len;
    img.hop = hop;
    img.fft_len = nfft;

    const auto window = hann_window(cfg.window_len);
    detail::Dft dft(nfft);
    const int half = nfft / 2;
    for (int f = 0; f < frames; ++f) {
        const std::size_t start = static_cast<std::size_t>(f) * static_cast<std::size_t>(hop);
        auto* in = dft.input();
        for (int i = 0; i < nfft; ++i) {
            const std::size_t k = start + static_cast<std::size_t>(i);
            in[i] = (i < cfg.window_len && k < len) ? signal.samples[k] * window[i] : std::complex<double>{};
        }
        dft.execute();
        const auto* out = dft.output();
        for (int bin = 0; bin < nfft; ++bin) {
            const int row = (bin + half) % nfft;
            img.at(row, f) = std::abs(out[bin]);
        }
    }
    return img;
}

/// Row of the DC-centred image that holds DFT bin `bin`.
inline int row_of_bin(int bin, int fft_len) {
    return ((bin % fft_len + fft_len) % fft_len + fft_len / 2) % fft_len;
}

/// Bilinear resampling with half-pixel centres and edge clamping.
/// Same-size input is returned unchanged.
inline TimeFreqImage resize_to_grid(const TimeFreqImage& img, int rows, int cols) {
    if (rows <= 0 || cols <= 0) throw Error(ErrorCode::InvalidArgument, "target dims must be positive");
    if (img.rows == rows && img.cols == cols) return img;
    TimeFreqImage out = img;
    out.rows = rows;
    out.cols = cols;
    out.mag.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    const double sy = static_cast<double>(img.rows) / rows;
    const double sx = static_cast<double>(img.cols) / cols;

    struct Tap {
        int lo, hi;
        double w;  // weight of hi
    };
    const auto taps = [](int n_out, int n_in, double scale) {
        std::vector<Tap> t(static_cast<std::size_t>(n_out));
        for (int i = 0; i < n_out; ++i) {
            double src = (i + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
            const int lo = static_cast<int>(std::floor(src));
            const int hi = std::min(lo + 1, n_in - 1);
            t[i] = {lo, hi, src - lo};
        }
        return t;
    };
    const auto ty = taps(rows, img.rows, sy);
    const auto tx = taps(cols, img.cols, sx);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const auto& a = ty[r];
            const auto& b = tx[c];
            const double top = img.at(a.lo, b.lo) * (1.0 - b.w) + img.at(a.lo, b.hi) * b.w;
            const double bottom = img.at(a.hi, b.lo) * (1.0 - b.w) + img.at(a.hi, b.hi) * b.w;
            out.at(r, c) = top * (1.0 - a.w) + bottom * a.w;
        }
    }
    return out;
}

/// Scales the image so its largest entry is 1. An all-zero image is left alone.
inline void normalize_max(TimeFreqImage& img) {
    const double peak = img.mag.empty() ? 0.0 : *std::max_element(img.mag.begin(), img.mag.end());
    if (peak <= 0.0) return;
    for (auto& v : img.mag) v /= peak;
}

/// Full front end: STFT magnitude, resize to the configured grid, max-normalize.
inline TimeFreqImage signal_to_image(const IQSignal& signal, const StftConfig& cfg = {}) {
    auto img = resize_to_grid(stft_magnitude(signal, cfg), cfg.image_rows, cfg.image_cols);
    normalize_max(img);
    return img;
}

/// Image cut into a row-major grid of n x m patches, each flattened row-major.
struct PatchSequence {
    int patch_rows = 0;  // n
    int patch_cols = 0;  // m
    int image_rows = 0;  // N
    int image_cols = 0;  // M
    std::vector<double> data;  // count() * patch_size()

    int count() const { return (image_rows / patch_rows) * (image_cols / patch_cols); }
    int patch_size() const { return patch_rows * patch_cols; }
    const double* patch(int i) const { return data.data() + static_cast<std::size_t>(i) * patch_size(); }
};

inline PatchSequence patchify(const TimeFreqImage& img, int n, int m) {
    if (n <= 0 || m <= 0 || img.rows % n != 0 || img.cols % m != 0) {
        throw Error(ErrorCode::InvalidArgument, "patch " + std::to_string(n) + "x" + std::to_string(m) +
                                                    " does not tile a " + std::to_string(img.rows) + "x" +
                                                    std::to_string(img.cols) + " image");
    }
    PatchSequence ps{n, m, img.rows, img.cols, {}};
    ps.data.reserve(img.mag.size());
    const int grid_r = img.rows / n;
    const int grid_c = img.cols / m;
    for (int gr = 0; gr < grid_r; ++gr) {
        for (int gc = 0; gc < grid_c; ++gc) {
            for (int r = 0; r < n; ++r) {
                for (int c = 0; c < m; ++c) ps.data.push_back(img.at(gr * n + r, gc * m + c));
            }
        }
    }
    return ps;
}

inline TimeFreqImage unpatchify(const PatchSequence& ps) {
    TimeFreqImage img;
    img.rows = ps.image_rows;
    img.cols = ps.image_cols;
    img.mag.assign(static_cast<std::size_t>(img.rows) * img.cols, 0.0);
    const int grid_c = ps.image_cols / ps.patch_cols;
    std::size_t idx = 0;
    for (int p = 0; p < ps.count(); ++p) {
        const int gr = p / grid_c;
        const int gc = p % grid_c;
        for (int r = 0; r < ps.patch_rows; ++r) {
            for (int c = 0; c < ps.patch_cols; ++c) {
                img.at(gr * ps.patch_rows + r, gc * ps.patch_cols + c) = ps.data[idx++];
            }
        }
    }
    return img;
}

}  // namespace sig2text
