#pragma once

// Umbrella header. depth_png.hpp is separate so that only targets doing
// PNG I/O need libpng.

#include "ldif/common.hpp"
#include "ldif/trimesh.hpp"
#include "ldif/mesh_io.hpp"
#include "ldif/bvh.hpp"
#include "ldif/geom.hpp"
#include "ldif/fixtures.hpp"
#include "ldif/decoder.hpp"
#include "ldif/model.hpp"
#include "ldif/model_io.hpp"
#include "ldif/loss.hpp"
#include "ldif/grad.hpp"
#include "ldif/fit.hpp"
#include "ldif/mesher.hpp"
#include "ldif/kdtree.hpp"
#include "ldif/metrics.hpp"
#include "ldif/depth.hpp"
