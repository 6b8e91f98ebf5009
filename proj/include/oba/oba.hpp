#pragma once

#include "oba/compositor.hpp"
#include "oba/errors.hpp"
#include "oba/evalgen.hpp"
#include "oba/geojson.hpp"
#include "oba/image_io.hpp"
#include "oba/object_bank.hpp"
#include "oba/policy.hpp"
#include "oba/polygon.hpp"
#include "oba/raster.hpp"
#include "oba/rng.hpp"
#include "oba/sampler.hpp"
#include "oba/search.hpp"
#include "oba/transforms.hpp"
