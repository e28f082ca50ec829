from typing import List

import pytest
import torch

from src.services.phantom import generate_phantom_exam
from src.types.exam import Exam
from src.types.phantom import PhantomParams


def make_phantoms(count: int, size: int = 32, n_slices: int = 3, noise: float = 200.0) -> List[Exam]:
    return [
        generate_phantom_exam(
            PhantomParams(
                image_size=(size, size),
                n_slices=n_slices,
                inner_radius_px=size * 0.15,
                outer_radius_px=size * 0.3,
                noise_sigma=noise,
                exam_id=f"exam_{i:02d}",
                seed=i,
            )
        )
        for i in range(count)
    ]


@pytest.fixture(autouse=True, scope="session")
def single_thread():
    torch.set_num_threads(1)


@pytest.fixture
def phantom_exam() -> Exam:
    return generate_phantom_exam(PhantomParams(seed=7, exam_id="phantom_a"))


@pytest.fixture
def small_exams() -> List[Exam]:
    return make_phantoms(5)
