#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "csda/geometry.hpp"

namespace csda {

// Cloth class palette. 0 is reserved for rendered background; faces always
// carry one of the five cloth classes.
enum class FaceLabel : std::uint8_t {
    body = 1,
    top_edge = 2,
    middle_edge = 3,
    bottom_edge = 4,
    grasp_point = 5,
};

enum class SpringClass : std::uint8_t { structural, shear, bend };

struct Spring {
    int i = 0, j = 0;
    double rest_length = 0;
    SpringClass cls = SpringClass::structural;
};

struct Stiffness {
    double structural = 500.0;
    double shear = 250.0;
    double bend = 50.0;

    double of(SpringClass c) const {
        switch (c) {
            case SpringClass::structural: return structural;
            case SpringClass::shear: return shear;
            default: return bend;
        }
    }
};

struct ClothMesh {
    std::vector<Vec3> vertices;                 // build-frame rest positions (m)
    std::vector<std::array<int, 4>> faces;      // quads, lattice order
    std::vector<Spring> springs;
    std::vector<FaceLabel> face_labels;
    double vertex_mass = 0;                     // uniform, density * cell_area (kg)
    double cell_size = 0;                       // lattice pitch (m)
};

struct ClothState {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;
    int pinned_vertex = -1;          // -1: nothing pinned
    double time_step = 1.0 / 60.0;   // seconds per step() call
    double damping = 0.02;           // in [0,1), applied once per step
    Vec3 gravity{0, 0, -9.8};
    bool not_at_rest_warning = false;
};

struct HangConfig {
    int hang_vertex = 0;
    double yaw = 0, pitch = 0, roll = 0;
};

struct SimParams {
    double frame_dt = 1.0 / 60.0;
    // A frame integrated as one Euler step at frame_dt is unstable for any
    // usable stiffness (dt * sqrt(k_sum/m) >> 2), so each frame is divided
    // into substeps of frame_dt/substeps with per-substep damping chosen to
    // compound to `damping` per frame.
    int substeps = 96;
    double damping = 0.02;
    double density = 0.15;  // kg/m^2
    Stiffness stiffness;
    Vec3 gravity{0, 0, -9.8};
};

// Procedural flat cross-shaped T-shirt surrogate: body rectangle, two sleeve
// rectangles attached at the top corners, rectangular neck cutout. Boundary
// faces carry edge labels (neckline/shoulders top, cuffs middle, hem bottom,
// body sides split at the midline) and the two shoulder and two hem corners
// carry grasp_point regions.
ClothMesh build_surrogate_tshirt(double body_w, double body_h, double sleeve_w,
                                 double sleeve_h, double resolution,
                                 double density = 0.15);

// One semi-implicit Euler update: v += dt*f/m, v *= (1-damping), x += dt*v.
// The pinned vertex does not move. Throws std::runtime_error when positions
// leave the finite range.
void step(ClothState& state, const ClothMesh& mesh, const Stiffness& stiffness);

// Rotates the mesh about the hang vertex, pins it at the origin and runs
// `steps` frames of `params.substeps` Euler updates each. Sets the
// not_at_rest_warning flag if the final mean kinetic energy exceeds
// 1e-4 J per vertex.
ClothState simulate_hang(const ClothMesh& mesh, int hang_vertex, double yaw, double pitch,
                         double roll, int steps = 250, const SimParams& params = {});

// Deterministic hang configurations: uniform vertex, yaw in [0,2pi),
// pitch/roll in [-pi/6, pi/6].
std::vector<HangConfig> sample_hang_configs(std::uint64_t seed, int count, int vertex_count);

double kinetic_energy(const ClothState& state, const ClothMesh& mesh);
// Kinetic + spring potential + gravitational potential (relative to z=0).
double mechanical_energy(const ClothState& state, const ClothMesh& mesh,
                         const Stiffness& stiffness);

// Debug dump: ASCII OBJ plus a "<path>.labels" sidecar with one
// "face_index class_id" pair per line.
void write_obj(const std::filesystem::path& path, const ClothMesh& mesh,
               const std::vector<Vec3>& positions);

}  // namespace csda
