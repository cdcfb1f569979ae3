/**
 * Best-effort neural mode: a small 3-channel convolutional score network
 * loaded from externally supplied JSON weights (none are bundled).
 *
 * Weight file layout:
 *   {
 *     "parameterization": "score" | "epsilon",
 *     "layers": [
 *       { "weight": number[out][in][3][3], "bias": number[out], "activation": "relu" | "none" }
 *     ]
 *   }
 *
 * The served convention is always a score; epsilon-parameterized weights are
 * converted via score = -eps / sqrt(1 - alphaBar_t).
 */

import * as fs from "fs";

import { ScoreFn, Schedule } from "./priors";

interface LayerSpec {
  weight: number[][][][];
  bias: number[];
  activation?: "relu" | "none";
}

interface WeightFile {
  parameterization?: "score" | "epsilon";
  layers: LayerSpec[];
}

function conv3x3(
  input: Float64Array,
  height: number,
  width: number,
  spec: LayerSpec
): Float64Array {
  const outChannels = spec.weight.length;
  const inChannels = spec.weight[0].length;
  const out = new Float64Array(outChannels * height * width);
  for (let oc = 0; oc < outChannels; oc++) {
    const bias = spec.bias[oc];
    for (let i = 0; i < height; i++) {
      for (let j = 0; j < width; j++) {
        let acc = bias;
        for (let ic = 0; ic < inChannels; ic++) {
          const base = ic * height * width;
          const w = spec.weight[oc][ic];
          for (let di = -1; di <= 1; di++) {
            const ii = Math.min(Math.max(i + di, 0), height - 1);
            for (let dj = -1; dj <= 1; dj++) {
              const jj = Math.min(Math.max(j + dj, 0), width - 1);
              acc += w[di + 1][dj + 1] * input[base + ii * width + jj];
            }
          }
        }
        out[oc * height * width + i * width + j] = acc;
      }
    }
  }
  return out;
}

export function loadNeuralScore(weightsPath: string, schedule: Schedule): ScoreFn {
  if (!fs.existsSync(weightsPath)) {
    throw new Error(`weights file not found: ${weightsPath}`);
  }
  const spec = JSON.parse(fs.readFileSync(weightsPath, "utf-8")) as WeightFile;
  if (!Array.isArray(spec.layers) || spec.layers.length === 0) {
    throw new Error(`weights file ${weightsPath} has no layers`);
  }
  const epsilonParameterized = spec.parameterization === "epsilon";

  return (image, t, height, width, channels) => {
    if (channels !== spec.layers[0].weight[0].length) {
      throw new Error(
        `network expects ${spec.layers[0].weight[0].length} input channels, got ${channels}`
      );
    }
    let activations: Float64Array = Float64Array.from(image);
    for (let li = 0; li < spec.layers.length; li++) {
      activations = conv3x3(activations, height, width, spec.layers[li]);
      if ((spec.layers[li].activation ?? "none") === "relu" && li < spec.layers.length - 1) {
        for (let i = 0; i < activations.length; i++) {
          if (activations[i] < 0) activations[i] = 0;
        }
      }
    }
    if (activations.length !== channels * height * width) {
      throw new Error("network output channel count does not match the request");
    }
    if (epsilonParameterized) {
      const scale = -1.0 / Math.sqrt(1.0 - schedule.alphaBars[t - 1]);
      for (let i = 0; i < activations.length; i++) {
        activations[i] *= scale;
      }
    }
    return activations;
  };
}
