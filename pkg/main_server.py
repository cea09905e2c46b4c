# main_server.py
import json
import os
import tempfile
import traceback
from typing import Optional

import numpy as np
import uvicorn
from fastapi import FastAPI, File, Form, UploadFile
from fastapi.responses import HTMLResponse, JSONResponse

import settings
from exceptions import ConfigError, DataError, GLNEMError
from families import FAMILIES
from glnem import fit_to_dir
from network_io import load_network, save_network
from run_config import RunConfig
from simulate import generate

app = FastAPI(title="GLNEM fitting service", version=settings.VERSION)

INDEX_PAGE = """<!doctype html>
<html>
<head><title>GLNEM</title></head>
<body>
<h1>Generalized linear network eigenmodels</h1>
<form action="/fit" method="post" enctype="multipart/form-data">
  <p>Edge list (i,j,y,x1..): <input type="file" name="network"></p>
  <p>Family: <input name="family" value="bernoulli"> Link: <input name="link" value=""></p>
  <p>Truncation d: <input name="d" value="8"> Warmup: <input name="warmup" value="1000">
     Draws: <input name="draws" value="1000"> Seed: <input name="seed" value="0"></p>
  <p><button type="submit">Fit</button></p>
</form>
</body>
</html>
"""


def _error_response(e: Exception) -> JSONResponse:
    status = 400 if isinstance(e, (ConfigError, DataError)) else 500
    kind = e.kind if isinstance(e, GLNEMError) else "internal"
    return JSONResponse(content={"error": f"{kind} error: {e}"}, status_code=status)


@app.get("/", response_class=HTMLResponse)
async def read_root():
    """Serve a minimal upload form."""
    return HTMLResponse(INDEX_PAGE)


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {
        "status": "healthy",
        "version": settings.VERSION,
        "families": sorted(FAMILIES),
        "threads": settings.thread_cap(),
        "endpoints": ["/simulate", "/fit"],
    }


@app.post("/simulate")
def simulate_network(
    n: int = Form(100),
    d0: int = Form(3),
    family: str = Form("bernoulli"),
    link: str = Form(""),
    c: Optional[float] = Form(None),
    phi: Optional[float] = Form(None),
    power: Optional[float] = Form(None),
    zero_inflation: float = Form(0.0),
    seed: int = Form(0),
):
    """Simulate a network; returns it as edge-csv text together with the true parameters."""
    print(f"Simulate request: family={family} n={n} d0={d0} seed={seed}")
    try:
        config = RunConfig().update({
            "simulate.n": n, "simulate.d0": d0, "simulate.family": family, "simulate.link": link or None,
            "simulate.c": c, "simulate.phi": phi, "simulate.power": power,
            "simulate.zero_inflation": zero_inflation, "sampler.seed": seed,
        }, where="form")
        data, truth = generate(config.sim_config())
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "network.csv")
            save_network(data, path, "edge-csv")
            with open(path, "r", encoding="utf-8") as handle:
                edge_csv = handle.read()
        return JSONResponse(content={
            "edge_csv": edge_csv,
            "truth": {"beta0": np.asarray(truth.beta0).tolist(), "lambda0": truth.lambda0.tolist(),
                      "U0": truth.U0.tolist()},
        })
    except Exception as e:
        print(f"Simulate failed: {e}")
        if not isinstance(e, GLNEMError):
            print(f"Traceback: {traceback.format_exc()}")
        return _error_response(e)


@app.post("/fit")
def fit_network(
    network: UploadFile = File(...),
    family: str = Form("bernoulli"),
    link: str = Form(""),
    d: int = Form(8),
    warmup: int = Form(1000),
    draws: int = Form(1000),
    chains: int = Form(1),
    init_iterations: int = Form(500),
    seed: int = Form(0),
    intercept: bool = Form(False),
    n: Optional[int] = Form(None),
):
    """Fit an uploaded edge-csv network and return the posterior summary."""
    print(f"Fit request: family={family} d={d} warmup={warmup} draws={draws} chains={chains} seed={seed}")
    try:
        config = RunConfig().update({
            "family.name": family, "family.link": link or None, "prior.d": d,
            "sampler.warmup": warmup, "sampler.draws": draws, "sampler.chains": chains,
            "sampler.init_iterations": init_iterations,
            "sampler.seed": seed, "sampler.progress": False, "data.intercept": intercept,
        }, where="form").validate()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "network.csv")
            with open(path, "wb") as handle:
                handle.write(network.file.read())
            data = load_network(path, "edge-csv", n=n, add_intercept=intercept)
            fitted, paths = fit_to_dir(config, data, os.path.join(tmp, "out"))
            with open(paths["summary_json"], "r", encoding="utf-8") as handle:
                summary = handle.read()
        return JSONResponse(content={"draws": len(fitted), "summary": json.loads(summary)})
    except Exception as e:
        print(f"Fit failed: {e}")
        if not isinstance(e, GLNEMError):
            print(f"Traceback: {traceback.format_exc()}")
        return _error_response(e)


if __name__ == "__main__":
    uvicorn.run(app, host="0.0.0.0", port=8000)
