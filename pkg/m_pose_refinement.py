# m_pose_refinement.py
from stream_pipeline.data_package import DataPackage, DataPackageController, DataPackagePhase, DataPackageModule, Status
from stream_pipeline.module_classes import ExecutionModule, ModuleOptions

from backend import BackendSession
from errors import RadarBAError
import data
import logger

log = logger.get_logger()

class Pose_Refinement(ExecutionModule):
    def __init__(self,
                    session: BackendSession,
                    timeout: float = 3600.0
                ) -> None:
        super().__init__(ModuleOptions(
                                use_mutex=False,
                                timeout=timeout,
                            ),
                            name="Pose-Refinement-Module"
                        )
        self.session: BackendSession = session

    def execute(self, dp: DataPackage[data.RadarData], dpc: DataPackageController, dpp: DataPackagePhase, dpm: DataPackageModule) -> None:
        if not dp.data:
            raise Exception("No data found")
        if dp.data.keyframe is None:
            raise Exception("No keyframe found")

        try:
            best = self.session.refine(dp.data.keyframe)
        except RadarBAError as e:
            dp.data.error = e
            dpm.message = f"Stage pose failed on keyframe {dp.data.keyframe.id}: {e}"
            dpm.status = Status.EXIT
            return
        if best is not None:
            dp.data.stage_losses["pose"] = best
