#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <string>
#include <vector>

#include "albumen/core/errors.hpp"
#include "albumen/core/image.hpp"

namespace albumen {

namespace detail {

inline unsigned char to_u8(float v) {
    const int q = static_cast<int>(std::lround(v * 255.0f));
    return static_cast<unsigned char>(std::clamp(q, 0, 255));
}

/// CHW unit-range float -> HWC 8-bit BGR (or single channel).
inline cv::Mat chw_to_mat(const Tensor& t) {
    const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
    cv::Mat m(H, W, C == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (C == 1) {
                m.at<unsigned char>(y, x) = to_u8(t.at3(0, y, x));
            } else {
                auto& px = m.at<cv::Vec3b>(y, x);
                px[0] = to_u8(t.at3(2, y, x));  // B
                px[1] = to_u8(t.at3(1, y, x));  // G
                px[2] = to_u8(t.at3(0, y, x));  // R
            }
        }
    return m;
}

inline Tensor mat_to_chw(const cv::Mat& m) {
    const int C = m.channels() == 1 ? 1 : 3;
    Tensor t({C, m.rows, m.cols});
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            if (C == 1) {
                t.at3(0, y, x) = m.at<unsigned char>(y, x) / 255.0f;
            } else {
                const auto& px = m.at<cv::Vec3b>(y, x);
                t.at3(0, y, x) = px[2] / 255.0f;
                t.at3(1, y, x) = px[1] / 255.0f;
                t.at3(2, y, x) = px[0] / 255.0f;
            }
        }
    return t;
}

}  // namespace detail

/// Read PNG/JPEG as a unit-range (3,H,W) tensor.
inline ImageTensor load_image(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
    if (m.empty()) throw DataError("cannot read image: " + path);
    return ImageTensor(detail::mat_to_chw(m), Range::Unit);
}

inline void save_image(const std::string& path, const ImageTensor& img) {
    const ImageTensor u = to_unit(img);
    if (!cv::imwrite(path, detail::chw_to_mat(u.t)))
        throw DataError("cannot write image: " + path);
}

/// Masks persist as single-channel PNG, 255 = defect.
inline void save_mask(const std::string& path, const DefectMask& mask) {
    const int H = mask.height(), W = mask.width();
    cv::Mat m(H, W, CV_8UC1);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            m.at<unsigned char>(y, x) = mask.m.at2(y, x) != 0.0f ? 255 : 0;
    if (!cv::imwrite(path, m)) throw DataError("cannot write mask: " + path);
}

inline DefectMask load_mask(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (m.empty()) throw DataError("cannot read mask: " + path);
    Tensor t({m.rows, m.cols});
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x)
            t.at2(y, x) = m.at<unsigned char>(y, x) > 127 ? 1.0f : 0.0f;
    return DefectMask(std::move(t));
}

/// Encode to JPEG at the given quality and decode again, in memory.
inline Tensor jpeg_roundtrip(const Tensor& chw_unit, int quality) {
    std::vector<unsigned char> buf;
    const std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, quality};
    if (!cv::imencode(".jpg", detail::chw_to_mat(chw_unit), buf, params))
        throw DegradationOpError("jpeg", "encode failed");
    cv::Mat dec = cv::imdecode(buf, chw_unit.dim(0) == 1 ? cv::IMREAD_GRAYSCALE
                                                         : cv::IMREAD_COLOR);
    if (dec.empty()) throw DegradationOpError("jpeg", "decode failed");
    return detail::mat_to_chw(dec);
}

}  // namespace albumen
