#pragma once

#include "zoomstack/errors.hpp"
#include "zoomstack/image.hpp"
#include "zoomstack/rng.hpp"
#include "zoomstack/zoom.hpp"
#include "zoomstack/pyramid.hpp"
#include "zoomstack/blend.hpp"
#include "zoomstack/diffusion.hpp"
#include "zoomstack/denoiser.hpp"
#include "zoomstack/grounding.hpp"
#include "zoomstack/sampler.hpp"
#include "zoomstack/protocol.hpp"
#include "zoomstack/remote.hpp"
#include "zoomstack/io.hpp"
#include "zoomstack/synthetic.hpp"
#include "zoomstack/scene.hpp"
#include "zoomstack/video.hpp"
#include "zoomstack/verify.hpp"
#include "zoomstack/cli.hpp"
