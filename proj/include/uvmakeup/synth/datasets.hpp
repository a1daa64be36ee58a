#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/core/raster.hpp"
#include "uvmakeup/pattern/train.hpp"
#include "uvmakeup/synth/sticker.hpp"
#include "uvmakeup/uvgeom/geometry_provider.hpp"
#include "uvmakeup/uvgeom/position_map.hpp"

namespace uvmakeup::color {
class ColorNet;
}

namespace uvmakeup::synth {

struct FaceRecord {
  std::string id;
  Image image;
  uvgeom::PositionMap position;
};

struct FaceSetOptions {
  int min_size = 150;    // smaller crops are discarded
  int image_size = 256;  // kept crops are resized to image_size x image_size
};

/// Face photos with their geometry. Loading reads every *.png in the
/// directory (sorted); a `<stem>.uvpm` sidecar is used when the image needed no
/// resizing, otherwise the provider estimates geometry. Faces that are too
/// small or whose geometry fails are skipped with a logged reason.
struct FaceSet {
  std::vector<FaceRecord> faces;
  std::vector<std::string> skipped;

  static FaceSet load(const std::filesystem::path& dir, const uvgeom::GeometryProvider& provider,
                      const FaceSetOptions& options = {});
};

/// Writes `n` synthetic subjects as `<dir>/faceNNNN.png` with `.uvpm`
/// sidecars and a faces.jsonl description. With `makeup` each subject wears a
/// random color style. Returns the in-memory set.
FaceSet make_faces(const std::filesystem::path& dir, int n, std::uint64_t seed, bool makeup = false);
FaceSet make_faces(int n, std::uint64_t seed, bool makeup = false);

/// Flags `n` items as test (true) or train: a seeded permutation puts
/// round(n * fraction) items in test, at least one on each side when n >= 2
/// and 0 < fraction < 1.
std::vector<bool> partition(std::size_t n, double fraction, std::uint64_t seed);

struct Synt1Options {
  int n = 10;
  std::uint64_t seed = 0;
  double test_fraction = 0.25;
  PlacementRange placement{};
  int threads = 0;
};

struct Synt1Sample {
  std::string id;
  std::string split;
  std::string face_id;
  std::string sticker;
  PlacementParams placement;
  Image image;             // rendered after-makeup image
  TextureMap texture;      // blended UV texture
  TextureMap base_texture; // texture extracted from the face before blending
  uvgeom::PositionMap position;
  PatternMask mask;        // UV ground truth
  Plane image_mask;        // ground truth rendered to image space
};

/// Extract, blend and render one sample.
Synt1Sample make_synt1_sample(const FaceRecord& face, const Sticker& sticker, const PlacementParams& p);

/// Appends `options.n` samples to the dataset at `root`:
///   images/<id>.png, textures/<id>.png + <id>.uvpm, masks/<id>.png (UV),
///   masks/<id>_image.png, manifest.jsonl (one record per sample with file
///   SHA-256s), manifest.sha256 (digest of manifest.jsonl) and dataset.json.
/// Subjects and stickers are partitioned between train and test. Sample i
/// draws from stream (seed, i), so appending and one-shot runs agree.
std::vector<nlohmann::json> generate_synt1(const FaceSet& faces, const std::vector<Sticker>& stickers,
                                           const Synt1Options& options, const std::filesystem::path& root);

/// (source texture, style texture) -> source texture wearing the style colors.
using ColorTransferFn = std::function<TextureMap(const TextureMap&, const TextureMap&)>;
ColorTransferFn color_net_transfer(const color::ColorNet& net);

struct Synt2Options {
  int n = 5;
  std::uint64_t seed = 0;
  PlacementRange placement{};
  int threads = 0;
};

struct Synt2Triplet {
  std::string id;
  std::string source_face;
  std::string reference_face;
  std::string style;
  std::string sticker;
  PlacementParams placement;
  Image source;        // color-transferred source subject
  Image reference;     // color-transferred reference subject with the sticker
  Image ground_truth;  // color-transferred source subject with the sticker
  uvgeom::PositionMap source_position;
  uvgeom::PositionMap reference_position;
  PatternMask mask;            // UV sticker mask shared by reference and ground truth
  PatternMask reference_mask;  // recomputed on the reference texture
};

Synt2Triplet make_synt2_triplet(const FaceRecord& a, const FaceRecord& b, const FaceRecord& style,
                                const Sticker& sticker, const PlacementParams& p, const ColorTransferFn& transfer);

/// Appends triplets to `root`: source/, reference/ (PNG + .uvpm),
/// ground_truth/, masks/<id>.png (UV), plus manifest files as for synt1.
std::vector<nlohmann::json> generate_synt2(const FaceSet& faces, const FaceSet& styles,
                                           const std::vector<Sticker>& stickers, const ColorTransferFn& transfer,
                                           const Synt2Options& options, const std::filesystem::path& root);

/// Manifest records of a dataset root, in order.
std::vector<nlohmann::json> read_manifest(const std::filesystem::path& root);

/// Recomputes every file hash and the manifest digest; throws io on mismatch.
void verify_manifest(const std::filesystem::path& root);

/// UV textures and masks of a synt1 dataset, optionally restricted to one split.
pattern::PatternDataset load_synt1(const std::filesystem::path& root, const std::string& split = {});

}  // namespace uvmakeup::synth
